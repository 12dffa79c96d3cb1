import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { initialState, reduce, replay } from "../src/state.js";
import type { MapDocument, StreamEvent } from "../src/types.js";

const fixture = JSON.parse(readFileSync("test/fixtures/hazard_session.json", "utf-8")) as {
  map: MapDocument;
  prompt_id: string;
  events_before_decision: StreamEvent[];
  events_after_decision: StreamEvent[];
};

const allEvents = [...fixture.events_before_decision, ...fixture.events_after_decision];

describe("reduce", () => {
  it("never mutates its input state", () => {
    const state = initialState(fixture.map);
    const snapshot = JSON.stringify(state);
    for (const event of fixture.events_before_decision) {
      reduce(state, event);
    }
    expect(JSON.stringify(state)).toBe(snapshot);
  });

  it("replaying the recorded log reproduces the same final view", () => {
    const first = replay(fixture.map, allEvents);
    const second = replay(fixture.map, allEvents);
    expect(JSON.stringify(first)).toBe(JSON.stringify(second));
  });

  it("tracks route, prompt, and pose through the hazard flow", () => {
    const beforeDecision = replay(fixture.map, fixture.events_before_decision);
    expect(beforeDecision.route?.node_sequence).toEqual(["sc0", "sc1", "sc2", "sc3"]);
    expect(beforeDecision.openPrompt?.prompt_id).toBe(fixture.prompt_id);
    expect(beforeDecision.alternative).not.toBeNull();
    expect(beforeDecision.believed?.node).toBe("sc1");

    const final = replay(fixture.map, allEvents);
    expect(final.openPrompt).toBeNull();
    expect(final.answeredPrompts).toContain(fixture.prompt_id);
    // the green alternative became the active route
    expect(final.route?.node_sequence).toEqual(
      beforeDecision.alternative?.node_sequence,
    );
    expect(final.alternative).toBeNull();
    expect(final.result).toEqual({ success: true, reason: "arrived at sc3" });
    expect(final.arrivedAt).toBe("sc3");
  });

  it("an answered prompt never reopens on replay", () => {
    let state = replay(fixture.map, allEvents);
    const promptEvent = fixture.events_before_decision.find((e) => e.type === "hazard_prompt")!;
    state = reduce(state, promptEvent);
    expect(state.openPrompt).toBeNull();
  });

  it("sequence numbers are monotone in the recorded log", () => {
    const seqs = allEvents.map((e) => e.seq);
    const sorted = [...seqs].sort((a, b) => a - b);
    expect(seqs).toEqual(sorted);
    expect(new Set(seqs).size).toBe(seqs.length);
    expect(replay(fixture.map, allEvents).lastSeq).toBe(seqs[seqs.length - 1]);
  });

  it("parses preference acknowledgements from chat", () => {
    let state = initialState(fixture.map);
    const ack = (text: string, seq: number): StreamEvent => ({
      seq,
      type: "chat_message",
      data: { role: "agent", text },
    });
    state = reduce(state, ack("Okay: avoiding stairs.", 1));
    expect(state.prefs.avoid).toEqual(["stairs"]);
    state = reduce(state, ack("Okay: avoiding noisy_area.", 2));
    expect(state.prefs.avoid).toEqual(["noisy_area", "stairs"]);
    state = reduce(state, ack("Okay: no longer avoiding stairs.", 3));
    expect(state.prefs.avoid).toEqual(["noisy_area"]);
    state = reduce(state, ack("Okay: walking speed 0.8 m/s.", 4));
    expect(state.prefs.speedMps).toBe(0.8);
    state = reduce(state, ack("Okay: detailed guidance.", 5));
    expect(state.prefs.verbosity).toBe("detailed");
  });
});
