import { GameModel, project, type View } from "./model.js";
import * as wire from "./protocol.js";

// Single-page flow: lobby (join code or comparison HIT) -> game -> completion,
// and for comparisons a verdict form once both games have ended.

const PALETTE: Record<number, string> = {
  47: "#f28c28", 50: "#f5d90a", 56: "#8e44ad", 57: "#2d6cdf", 59: "#3aa655", 60: "#d93025",
};
const HALF = 5;
const HEIGHT = 9;

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
const params = new URLSearchParams(location.search);
const wireUrl = params.get("wire") ?? `ws://${location.hostname}:${params.get("wirePort") ?? "7070"}`;

function show(screen: "lobby" | "game" | "verdict") {
  for (const s of ["lobby", "game", "verdict"]) $(s).hidden = s !== screen;
}

function draw(canvas: HTMLCanvasElement, blocks: wire.Block[], view: View) {
  const ctx = canvas.getContext("2d")!;
  const side = 2 * HALF + 1;
  const rows = view === "top" ? side : HEIGHT;
  const cell = Math.floor(Math.min(canvas.width / side, canvas.height / rows));
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  for (let u = 0; u < side; ++u)
    for (let v = 0; v < rows; ++v) ctx.strokeRect(u * cell, v * cell, cell, cell);
  for (const [u, v, id] of project(blocks, view, HALF)) {
    const row = view === "top" ? v : HEIGHT - 1 + v;
    ctx.fillStyle = PALETTE[id] ?? "#888";
    ctx.fillRect(u * cell + 1, row * cell + 1, cell - 2, cell - 2);
  }
  // Compass: which way is north on screen for this view.
  const labels: Record<View, [string, string, string, string]> = {
    top: ["N", "E", "S", "W"], north: ["", "W", "", "E"], south: ["", "E", "", "W"],
    east: ["", "N", "", "S"], west: ["", "S", "", "N"],
  };
  const [up, right, down, left] = labels[view];
  ctx.fillStyle = "#000";
  ctx.font = "bold 14px sans-serif";
  ctx.textAlign = "center";
  if (up) ctx.fillText(up, canvas.width / 2, 14);
  if (down) ctx.fillText(down, canvas.width / 2, rows * cell - 4);
  ctx.textAlign = "right";
  ctx.fillText(right, side * cell - 4, (rows * cell) / 2);
  ctx.textAlign = "left";
  ctx.fillText(left, 4, (rows * cell) / 2);
}

class Game {
  private ws: WebSocket;
  private model: GameModel | null = null;
  private ref = 0;
  private view: View = "top";

  constructor(code: string, private onEnd: (success: boolean, completion: string) => void) {
    this.ws = new WebSocket(wireUrl);
    this.ws.onopen = () => this.send(wire.hello(params.get("humanId") ?? undefined));
    this.ws.onmessage = (e) => this.receive(JSON.parse(e.data), code);
    this.ws.onclose = () => this.status("disconnected");
    for (const b of document.querySelectorAll<HTMLButtonElement>("[data-view]")) {
      b.onclick = () => { this.view = b.dataset.view as View; this.render(); };
    }
    $("send").onclick = () => {
      const text = $<HTMLInputElement>("message").value.trim();
      if (!text) return;
      this.submit({ kind: "ChatMessage", role: "architect", text });
      $<HTMLInputElement>("message").value = "";
    };
    $("end-turn").onclick = () => this.submit({ kind: "TurnEnded", role: "architect" });
    $("end-success").onclick = () => this.submit({ kind: "GameEnded", success: true });
    $("end-fail").onclick = () => this.submit({ kind: "GameEnded", success: false });
  }

  private send(m: object) { this.ws.send(JSON.stringify(m)); }

  private submit(event: wire.EventBody) {
    if (this.model?.controlsEnabled()) this.send(wire.submit(this.model.sessionId, ++this.ref, event));
  }

  private status(text: string) { $("status").textContent = text; }

  private receive(m: unknown, code: string) {
    if (wire.isEvent(m)) {
      if (this.model?.apply(m) === "gap") this.send(wire.resync(this.model.sessionId, this.model.lastSeq));
      this.render();
      return;
    }
    const msg = m as wire.ServerMessage;
    switch (msg.type) {
      case "welcome": this.send(wire.join(code)); break;
      case "joined": this.model = new GameModel(msg); show("game"); break;
      case "ack": break;
      case "resync_done": this.model?.resynced(msg.lastSeq, msg.phase); break;
      case "completion":
        this.status(`Completion code: ${msg.code}`);
        this.onEnd(msg.success, msg.code);
        break;
      case "reject": case "error":
        if (!this.model) { $("lobby-error").textContent = `${msg.code}${msg.message ? ": " + msg.message : ""}`; show("lobby"); }
        else this.status(`rejected: ${msg.code}`);
        break;
      default: break;
    }
    this.render();
  }

  private render() {
    const m = this.model;
    if (!m) return;
    draw($<HTMLCanvasElement>("target"), m.target, this.view);
    draw($<HTMLCanvasElement>("build"), m.grid(), this.view);
    $("turn").textContent = m.ended ? (m.ended.success ? "Game over: success" : "Game over: failed")
      : m.phase === "ArchitectTurn" ? "Your turn" : `${m.builderLabel} is building`;
    const log = $("chat");
    log.replaceChildren(...m.chat.map((c) => {
      const li = document.createElement("li");
      li.textContent = `${c.role === "architect" ? "You" : m.builderLabel}: ${c.text}`;
      return li;
    }));
    for (const id of ["send", "end-turn", "end-success", "end-fail"]) $<HTMLButtonElement>(id).disabled = !m.controlsEnabled();
  }
}

async function comparison(hit: string) {
  const view = await (await fetch(`/comparisons/${hit}/participant`)).json();
  const list = $("hit-games");
  list.replaceChildren(...view.games.map((g: { label: string; joinCode: string; finished: boolean }) => {
    const b = document.createElement("button");
    b.textContent = g.finished ? `${g.label} (done)` : `Play ${g.label}`;
    b.disabled = g.finished;
    b.onclick = () => new Game(g.joinCode, () => setTimeout(() => comparison(hit), 1500));
    return b;
  }));
  show(view.verdictOpen ? "verdict" : "lobby");
  $("verdict-form").onsubmit = async (e) => {
    e.preventDefault();
    const form = new FormData(e.target as HTMLFormElement);
    const res = await fetch(`/comparisons/${hit}/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        winner: form.get("winner"),
        feedback: { "Agent 1": form.get("feedback1") ?? "", "Agent 2": form.get("feedback2") ?? "" },
      }),
    });
    $("verdict-status").textContent = res.ok ? "Thank you, your verdict was recorded." : `Error ${res.status}`;
  };
}

$("join").onclick = () => {
  $("lobby-error").textContent = "";
  new Game($<HTMLInputElement>("code").value.trim(), () => {});
};
const hit = params.get("hit");
if (hit) comparison(hit);
else show("lobby");
