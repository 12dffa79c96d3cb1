// Bootstrap: create a session on the serving host and wire the console to
// its event stream. Query parameters: ?map=<id>&start=<node>&debug=1

import { createSession, fetchMapDoc, HttpSessionApi, listMaps, openStream } from "./api.js";
import { GuideConsole } from "./console.js";

async function boot(): Promise<void> {
  const root = document.getElementById("console-root");
  if (!root) throw new Error("missing #console-root");
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "";
  const debug = params.get("debug") === "1";

  let mapId = params.get("map");
  if (!mapId) {
    const maps = await listMaps(base);
    mapId = maps[0];
  }
  if (!mapId) {
    root.textContent = "No maps are loaded on the server.";
    return;
  }

  const mapDoc = await fetchMapDoc(base, mapId);
  const body: Record<string, unknown> = { map_id: mapId };
  const start = params.get("start");
  if (start) body["start_node"] = start;
  const sessionId = await createSession(base, body);

  const consoleView = new GuideConsole(root, mapDoc, new HttpSessionApi(base, sessionId), { debug });
  openStream(base, sessionId, {
    onEvent: (event) => consoleView.applyEvent(event),
    onStatus: (status) => consoleView.setConnection(status),
  });

  const toggle = document.getElementById("debug-toggle");
  if (toggle instanceof HTMLInputElement) {
    toggle.checked = debug;
    toggle.addEventListener("change", () => consoleView.setDebug(toggle.checked));
  }
}

void boot().catch((error) => {
  const root = document.getElementById("console-root");
  if (root) root.textContent = `Failed to start: ${error}`;
});
