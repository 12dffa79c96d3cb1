// Wire types mirroring the session service JSON schemas.

export interface MapNode {
  id: string;
  x: number;
  y: number;
  tags: string[];
  label?: string | null;
}

export interface MapEdge {
  from: string;
  to: string;
  distance: number;
  direction: number;
  tags: string[];
}

export interface MapDocument {
  name: string;
  nodes: MapNode[];
  edges: MapEdge[];
}

export interface RouteLegJson {
  turn: string;
  from: string;
  to: string;
  to_label: string;
  distance: number;
  direction: number;
}

export interface RouteJson {
  start: string;
  goal: string;
  total_distance: number;
  node_sequence: string[];
  description: string;
  legs: RouteLegJson[];
}

export interface HazardPromptData {
  prompt_id: string;
  reason: string;
  confidence: number;
  alternative: RouteJson | null;
}

export type StreamEventType =
  | "session_created"
  | "chat_message"
  | "route_planned"
  | "pose_update"
  | "hazard_prompt"
  | "arrival"
  | "recovery"
  | "session_result";

export const STREAM_EVENT_TYPES: StreamEventType[] = [
  "session_created",
  "chat_message",
  "route_planned",
  "pose_update",
  "hazard_prompt",
  "arrival",
  "recovery",
  "session_result",
];

export interface StreamEvent {
  seq: number;
  type: StreamEventType;
  data: Record<string, unknown>;
}

export type ConnectionStatus = "connecting" | "live" | "reconnecting" | "closed";
