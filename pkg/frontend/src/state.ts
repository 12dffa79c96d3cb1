// View state derived purely from (map document, event prefix).
//
// reduce() never mutates its input, so replaying a recorded event log
// through a fresh initial state reproduces the exact same view -- the
// console does no client-side simulation.

import type {
  ConnectionStatus,
  HazardPromptData,
  MapDocument,
  RouteJson,
  StreamEvent,
} from "./types.js";

export interface ChatEntry {
  role: string;
  text: string;
}

export interface PoseView {
  node: string;
  heading: number;
}

export interface PrefsView {
  avoid: string[];
  speedMps: number | null;
  verbosity: string | null;
}

export interface ViewState {
  mapDoc: MapDocument;
  believed: PoseView | null;
  truth: PoseView | null;
  route: RouteJson | null;
  alternative: RouteJson | null;
  chat: ChatEntry[];
  openPrompt: HazardPromptData | null;
  answeredPrompts: string[];
  prefs: PrefsView;
  arrivedAt: string | null;
  recoveredAt: string | null;
  result: { success: boolean; reason: string } | null;
  odometer: number;
  lastSeq: number;
  connection: ConnectionStatus;
}

export function initialState(mapDoc: MapDocument): ViewState {
  return {
    mapDoc,
    believed: null,
    truth: null,
    route: null,
    alternative: null,
    chat: [],
    openPrompt: null,
    answeredPrompts: [],
    prefs: { avoid: [], speedMps: null, verbosity: null },
    arrivedAt: null,
    recoveredAt: null,
    result: null,
    odometer: 0,
    lastSeq: 0,
    connection: "connecting",
  };
}

const DECISION_PREFIX = "[decision] ";
const ACK_PREFIX = "Okay: ";

function parsePrefsAck(prefs: PrefsView, text: string): PrefsView {
  const change = text.slice(ACK_PREFIX.length).replace(/\.$/, "");
  if (change.startsWith("no longer avoiding ")) {
    const tag = change.slice("no longer avoiding ".length);
    return { ...prefs, avoid: prefs.avoid.filter((t) => t !== tag) };
  }
  if (change.startsWith("avoiding ")) {
    const tag = change.slice("avoiding ".length);
    return prefs.avoid.includes(tag) ? prefs : { ...prefs, avoid: [...prefs.avoid, tag].sort() };
  }
  const speed = change.match(/^walking speed ([0-9.]+) m\/s$/);
  if (speed) {
    return { ...prefs, speedMps: Number(speed[1]) };
  }
  const verbosity = change.match(/^(brief|detailed) guidance$/);
  if (verbosity) {
    return { ...prefs, verbosity: verbosity[1] };
  }
  return prefs;
}

export function reduce(state: ViewState, event: StreamEvent): ViewState {
  const next: ViewState = { ...state, lastSeq: Math.max(state.lastSeq, event.seq) };
  const data = event.data as Record<string, never>;
  switch (event.type) {
    case "session_created": {
      next.believed = { node: data["start_node"], heading: data["start_heading"] };
      return next;
    }
    case "chat_message": {
      const role = data["role"] as string;
      const text = data["text"] as string;
      next.chat = [...state.chat, { role, text }];
      if (role === "user" && text.startsWith(DECISION_PREFIX) && state.openPrompt) {
        next.answeredPrompts = [...state.answeredPrompts, state.openPrompt.prompt_id];
        next.openPrompt = null;
        next.alternative = null;
      }
      if (role === "agent" && text.startsWith(ACK_PREFIX)) {
        next.prefs = parsePrefsAck(state.prefs, text);
      }
      return next;
    }
    case "route_planned": {
      next.route = data["route"] as RouteJson;
      next.alternative = null;
      return next;
    }
    case "pose_update": {
      next.believed = { node: data["believed_node"], heading: data["believed_heading"] };
      if (data["true_node"] !== undefined) {
        next.truth = { node: data["true_node"], heading: data["true_heading"] };
      }
      if (data["odometer"] !== undefined) {
        next.odometer = data["odometer"];
      }
      return next;
    }
    case "hazard_prompt": {
      const prompt = data as unknown as HazardPromptData;
      if (state.answeredPrompts.includes(prompt.prompt_id)) {
        return next; // answered exactly once; a replayed prompt never reopens
      }
      next.openPrompt = prompt;
      next.alternative = prompt.alternative;
      return next;
    }
    case "arrival": {
      next.arrivedAt = data["node"];
      return next;
    }
    case "recovery": {
      next.recoveredAt = data["node"];
      return next;
    }
    case "session_result": {
      next.result = { success: data["success"], reason: data["reason"] };
      next.openPrompt = null;
      return next;
    }
    default:
      return next;
  }
}

export function replay(mapDoc: MapDocument, events: StreamEvent[]): ViewState {
  let state = initialState(mapDoc);
  for (const event of events) {
    state = reduce(state, event);
  }
  return state;
}
