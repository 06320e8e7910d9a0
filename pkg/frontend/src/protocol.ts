// Wire protocol shared with the simulation service: UTF-8 JSON messages,
// one document per message, discriminated by "type".

export interface Pouch {
  group: number;
  side: "left" | "right";
  kpa: number;
}

export interface Frame {
  type: "frame";
  session: string;
  t_s: number;
  everted_mm: number;
  mode: "grow" | "retract" | "hold";
  supply_left_kpa: number;
  supply_right_kpa: number;
  backbone_mm: [number, number][];
  pouches: Pouch[];
  warnings: string[];
}

export interface Ack {
  type: "ack";
  session: string;
  applies_at_s?: number;
}

export interface ErrorMsg {
  type: "error";
  session?: string;
  message: string;
}

export interface CloseMsg {
  type: "close";
  session: string;
}

export type ServerMessage = Frame | Ack | ErrorMsg | CloseMsg;

export interface CommandFields {
  mode?: "grow" | "retract" | "hold";
  supply_left_kpa?: number;
  supply_right_kpa?: number;
  speed_mm_s?: number;
}

/** Session config presets; the non-default one matches the per-pouch-valve
 * S-turn robot so Fig-9-style shapes can be re-driven by hand. */
export const PRESETS: Record<string, object> = {
  "bench (8 cells, paired valves)": {},
  "per-pouch valves (9 cells)": {
    geometry: { cells_per_side: 9, cpams_per_valve: 1 },
  },
};

export function createMessage(config: object): string {
  return JSON.stringify({ type: "create", config });
}

export function commandMessage(session: string, fields: CommandFields): string {
  return JSON.stringify({ type: "command", session, ...fields });
}

export function closeMessage(session: string): string {
  return JSON.stringify({ type: "close", session });
}

/** Parse and structurally validate a server message; null means "drop it". */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "ack":
      return typeof msg.session === "string" ? (msg as unknown as Ack) : null;
    case "error":
      return typeof msg.message === "string" ? (msg as unknown as ErrorMsg) : null;
    case "close":
      return typeof msg.session === "string" ? (msg as unknown as CloseMsg) : null;
    case "frame": {
      if (
        typeof msg.session !== "string" ||
        typeof msg.t_s !== "number" ||
        typeof msg.everted_mm !== "number" ||
        !Array.isArray(msg.backbone_mm) ||
        !Array.isArray(msg.pouches) ||
        !Array.isArray(msg.warnings)
      ) {
        return null;
      }
      for (const p of msg.backbone_mm as unknown[]) {
        if (!Array.isArray(p) || p.length !== 2) return null;
        if (typeof p[0] !== "number" || typeof p[1] !== "number") return null;
      }
      return msg as unknown as Frame;
    }
    default:
      return null;
  }
}
