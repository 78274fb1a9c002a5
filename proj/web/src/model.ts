import type { Block, EventBody, EventMessage, Joined, Phase, Role } from "./protocol.js";

const key = (x: number, y: number, z: number) => `${x},${y},${z}`;

/** Server-confirmed view of one session. Nothing changes until the server says so. */
export class GameModel {
  readonly sessionId: string;
  readonly target: Block[];
  readonly builderLabel: string;
  phase: Phase;
  lastSeq: number;
  chat: { role: Role; text: string }[] = [];
  ended: { success: boolean } | null = null;
  private blocks = new Map<string, Block>();

  constructor(j: Joined) {
    this.sessionId = j.sessionId;
    this.target = j.task.target;
    this.builderLabel = j.builder;
    this.phase = j.phase;
    this.lastSeq = j.lastSeq;
    for (const b of j.world.blocks) this.blocks.set(key(b[0], b[1], b[2]), b);
    for (const c of j.chat) if (c.kind === "ChatMessage") this.chat.push({ role: c.role, text: c.text });
  }

  grid(): Block[] {
    return [...this.blocks.values()].sort((a, b) => a[0] - b[0] || a[1] - b[1] || a[2] - b[2]);
  }

  /** The architect may act only on its own turn of a live game. */
  controlsEnabled(): boolean {
    return this.phase === "ArchitectTurn" && this.ended === null;
  }

  /**
   * Applies the next event. "stale" for a seq already seen; "gap" when one
   * was skipped, in which case nothing is applied and the caller resyncs.
   */
  apply(m: EventMessage): "applied" | "stale" | "gap" {
    if (m.sessionId !== this.sessionId || m.seq <= this.lastSeq) return "stale";
    if (m.seq !== this.lastSeq + 1) return "gap";
    this.lastSeq = m.seq;
    this.applyBody(m.event);
    return "applied";
  }

  resynced(lastSeq: number, phase: Phase): void {
    this.lastSeq = Math.max(this.lastSeq, lastSeq);
    if (phase) this.phase = phase;
  }

  private applyBody(e: EventBody): void {
    switch (e.kind) {
      case "BlockPlaced":
        this.blocks.set(key(...e.at), [...e.at, e.blockId]);
        break;
      case "BlockRemoved":
        this.blocks.delete(key(...e.at));
        break;
      case "ChatMessage":
        this.chat.push({ role: e.role, text: e.text });
        break;
      case "TurnEnded":
        this.phase = e.role === "architect" ? "BuilderTurn" : "ArchitectTurn";
        break;
      case "GameEnded":
        this.phase = "Ended";
        this.ended = { success: e.success };
        break;
      default:
        break;
    }
  }
}

export type View = "top" | "north" | "south" | "east" | "west";

/**
 * Orthographic projection of a grid onto a view plane: for each pixel cell,
 * the block nearest the viewer. North is -z. Cells are [u, v, blockId] with
 * u growing rightwards and v growing downwards on screen.
 */
export function project(blocks: Block[], view: View, half = 5, floor = 63): [number, number, number][] {
  const best = new Map<string, { depth: number; cell: [number, number, number] }>();
  for (const [x, y, z, id] of blocks) {
    const h = floor - y;
    let u: number, v: number, depth: number;
    switch (view) {
      case "top": [u, v, depth] = [x + half, z + half, -y]; break;
      case "north": [u, v, depth] = [half - x, h, z]; break;
      case "south": [u, v, depth] = [x + half, h, -z]; break;
      case "east": [u, v, depth] = [half - z, h, -x]; break;
      case "west": [u, v, depth] = [z + half, h, x]; break;
    }
    const k = `${u},${v}`;
    const seen = best.get(k);
    if (!seen || depth < seen.depth) best.set(k, { depth, cell: [u, v, id] });
  }
  return [...best.values()].map((b) => b.cell);
}
