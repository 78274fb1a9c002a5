// Wire shapes shared with the game server. Coordinates are world coordinates:
// the build zone floor is y = 63.

export type Role = "architect" | "builder" | "system";
export type Phase = "Created" | "ArchitectTurn" | "BuilderTurn" | "Ended";

/** [x, y, z, blockId] */
export type Block = [number, number, number, number];

export type EventBody =
  | { kind: "PlayerJoined"; role: Role }
  | { kind: "ChatMessage"; role: Role; text: string }
  | { kind: "PlayerMove"; role: Role; pos: [number, number, number]; pitch: number; yaw: number }
  | { kind: "BlockPlaced"; at: [number, number, number]; blockId: number }
  | { kind: "BlockRemoved"; at: [number, number, number] }
  | { kind: "TurnEnded"; role: Role }
  | { kind: "GameEnded"; success: boolean; reporter?: Role };

export interface EventMessage {
  sessionId: string;
  seq: number;
  event: EventBody;
}

export interface Task {
  id: string;
  initial: Block[];
  target: Block[];
}

export interface Joined {
  type: "joined";
  sessionId: string;
  task: Task;
  world: { blocks: Block[] };
  chat: EventBody[];
  phase: Phase;
  lastSeq: number;
  stepBudget: number;
  builder: string;
}

export type ServerMessage =
  | { type: "welcome"; role: string; id: string; heartbeatSeconds: number }
  | Joined
  | { type: "ack"; ref?: unknown; sessionId: string; seq: number; phase: Phase }
  | { type: "reject"; ref?: unknown; code: string; message?: string }
  | { type: "error"; code: string; message?: string }
  | { type: "resync_done"; sessionId: string; lastSeq: number; phase: Phase }
  | { type: "completion"; sessionId: string; code: string; success: boolean }
  | { type: "pong"; ref?: unknown };

export function isEvent(m: unknown): m is EventMessage {
  return typeof m === "object" && m !== null && "sessionId" in m && "seq" in m && "event" in m && !("type" in m);
}

export const hello = (humanId?: string) => ({ type: "hello", role: "human", ...(humanId ? { humanId } : {}) });
export const join = (code: string) => ({ type: "join", code });
export const submit = (sessionId: string, ref: number, event: EventBody) => ({ type: "submit", sessionId, ref, event });
export const resync = (sessionId: string, fromSeq: number) => ({ type: "resync", sessionId, fromSeq });
