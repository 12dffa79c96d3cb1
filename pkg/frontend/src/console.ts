// The interactive console: chat transcript, live map, hazard prompts, and a
// preferences panel, all rendered from the event-derived view state.

import type { SessionApi } from "./api.js";
import { initialState, reduce, type ViewState } from "./state.js";
import { renderMap } from "./mapview.js";
import type { ConnectionStatus, MapDocument, StreamEvent } from "./types.js";

export interface ConsoleOptions {
  debug?: boolean;
}

export class GuideConsole {
  state: ViewState;
  private readonly root: HTMLElement;
  private readonly api: SessionApi;
  private debug: boolean;

  private mapPane!: HTMLElement;
  private chatLog!: HTMLUListElement;
  private promptPane!: HTMLElement;
  private prefsPane!: HTMLElement;
  private statusPane!: HTMLElement;
  private banner!: HTMLElement;
  private input!: HTMLInputElement;

  constructor(root: HTMLElement, mapDoc: MapDocument, api: SessionApi, options: ConsoleOptions = {}) {
    this.root = root;
    this.api = api;
    this.debug = options.debug ?? false;
    this.state = initialState(mapDoc);
    this.buildSkeleton();
    this.render();
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="reconnect-banner" hidden>Connection lost - reconnecting...</div>
      <div class="layout">
        <section class="map-pane" aria-label="Map"></section>
        <section class="side-pane">
          <ul class="chat-log" aria-live="polite" aria-label="Conversation"></ul>
          <div class="hazard-pane" hidden></div>
          <form class="chat-form">
            <label class="visually-hidden" for="chat-input">Message</label>
            <input id="chat-input" type="text" autocomplete="off"
                   placeholder="e.g. take me to the elevator" />
            <button type="submit" class="send">Send</button>
          </form>
          <div class="prefs-pane" aria-label="Preferences"></div>
          <div class="status-pane" aria-label="Session status"></div>
        </section>
      </div>`;
    this.mapPane = this.root.querySelector(".map-pane")!;
    this.chatLog = this.root.querySelector(".chat-log")!;
    this.promptPane = this.root.querySelector(".hazard-pane")!;
    this.prefsPane = this.root.querySelector(".prefs-pane")!;
    this.statusPane = this.root.querySelector(".status-pane")!;
    this.banner = this.root.querySelector(".reconnect-banner")!;
    this.input = this.root.querySelector("#chat-input")!;
    const form = this.root.querySelector<HTMLFormElement>(".chat-form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value.trim();
      if (!text) return;
      this.input.value = "";
      void this.api.postQuery(text);
    });
  }

  applyEvent(event: StreamEvent): void {
    this.state = reduce(this.state, event);
    this.render();
  }

  applyEvents(events: StreamEvent[]): void {
    for (const event of events) {
      this.state = reduce(this.state, event);
    }
    this.render();
  }

  setConnection(status: ConnectionStatus): void {
    this.state = { ...this.state, connection: status };
    this.render();
  }

  setDebug(debug: boolean): void {
    this.debug = debug;
    this.render();
  }

  render(): void {
    renderMap(this.mapPane, this.state, this.debug);
    this.renderChat();
    this.renderPrompt();
    this.renderPrefs();
    this.renderStatus();
    this.banner.hidden = this.state.connection !== "reconnecting";
  }

  private renderChat(): void {
    this.chatLog.replaceChildren(
      ...this.state.chat.map((entry) => {
        const item = document.createElement("li");
        item.className = `chat-${entry.role}`;
        item.textContent = `${entry.role === "user" ? "You" : "Guide"}: ${entry.text}`;
        return item;
      }),
    );
    this.chatLog.scrollTop = this.chatLog.scrollHeight;
  }

  private renderPrompt(): void {
    const prompt = this.state.openPrompt;
    if (!prompt) {
      this.promptPane.hidden = true;
      this.promptPane.replaceChildren();
      return;
    }
    this.promptPane.hidden = false;
    this.promptPane.innerHTML = `
      <p class="hazard-reason" role="alert">Hazard: ${prompt.reason}</p>
      <p class="hazard-alt">${
        prompt.alternative
          ? "An alternative route is shown in green."
          : "No alternative route exists."
      }</p>
      <button type="button" class="proceed" data-prompt-id="${prompt.prompt_id}">Proceed</button>
      <button type="button" class="reroute" data-prompt-id="${prompt.prompt_id}"
        ${prompt.alternative ? "" : "disabled"}>Reroute</button>`;
    for (const choice of ["proceed", "reroute"] as const) {
      const button = this.promptPane.querySelector<HTMLButtonElement>(`.${choice}`)!;
      button.addEventListener("click", () => {
        // Answerable exactly once: disable both buttons on the first click.
        this.promptPane
          .querySelectorAll<HTMLButtonElement>("button")
          .forEach((b) => (b.disabled = true));
        void this.api.postDecision(prompt.prompt_id, choice);
      });
    }
  }

  private renderPrefs(): void {
    const prefs = this.state.prefs;
    this.prefsPane.innerHTML = `
      <h2>Preferences</h2>
      <dl>
        <dt>Avoiding</dt><dd class="prefs-avoid">${prefs.avoid.join(", ") || "nothing"}</dd>
        <dt>Speed</dt><dd class="prefs-speed">${prefs.speedMps ?? "default"} m/s</dd>
        <dt>Guidance</dt><dd class="prefs-verbosity">${prefs.verbosity ?? "brief"}</dd>
      </dl>`;
  }

  private renderStatus(): void {
    const parts: string[] = [];
    if (this.state.believed) {
      parts.push(`at ${this.state.believed.node} facing ${this.state.believed.heading}°`);
    }
    if (this.state.route) {
      parts.push(`route to ${this.state.route.goal} (${this.state.route.total_distance} m)`);
    }
    if (this.state.result) {
      parts.push(this.state.result.success ? "arrived" : `failed: ${this.state.result.reason}`);
    }
    parts.push(`traveled ${this.state.odometer} m`);
    this.statusPane.textContent = parts.join(" | ");
  }
}
