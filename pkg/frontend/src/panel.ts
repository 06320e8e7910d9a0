// Command panel state: the operator edits values, the service acknowledges
// them, and a rejected command snaps the panel back to the last acked state.

import { CommandFields } from "./protocol.js";
import { clampKpa } from "./geometry.js";

export const MAX_SUPPLY_KPA = 40;
export const MAX_SPEED_MM_S = 50;

export type Mode = "grow" | "retract" | "hold";

export interface PanelValues {
  mode: Mode;
  supplyLeftKpa: number;
  supplyRightKpa: number;
  speedMmS: number;
}

export interface PanelState {
  current: PanelValues;
  acked: PanelValues;
  dirty: boolean;
}

export function initialPanel(): PanelState {
  const values: PanelValues = {
    mode: "hold",
    supplyLeftKpa: 0,
    supplyRightKpa: 0,
    speedMmS: 10,
  };
  return { current: { ...values }, acked: { ...values }, dirty: false };
}

/** Apply an operator edit; slider-style inputs are clamped to their ranges. */
export function userSet(state: PanelState, edit: Partial<PanelValues>): PanelState {
  const next: PanelValues = { ...state.current };
  if (edit.mode !== undefined) next.mode = edit.mode;
  if (edit.supplyLeftKpa !== undefined) {
    next.supplyLeftKpa = clampKpa(edit.supplyLeftKpa, MAX_SUPPLY_KPA);
  }
  if (edit.supplyRightKpa !== undefined) {
    next.supplyRightKpa = clampKpa(edit.supplyRightKpa, MAX_SUPPLY_KPA);
  }
  if (edit.speedMmS !== undefined) {
    next.speedMmS = Math.min(MAX_SPEED_MM_S, Math.max(0, edit.speedMmS));
  }
  return { current: next, acked: state.acked, dirty: true };
}

/** The service acknowledged the in-flight command: panel and ack agree. */
export function ackApplied(state: PanelState): PanelState {
  return { current: { ...state.current }, acked: { ...state.current }, dirty: false };
}

/** The service rejected the command: revert to the last acked values. */
export function rejected(state: PanelState): PanelState {
  return { current: { ...state.acked }, acked: state.acked, dirty: false };
}

export function toCommandFields(values: PanelValues): CommandFields {
  return {
    mode: values.mode,
    supply_left_kpa: values.supplyLeftKpa,
    supply_right_kpa: values.supplyRightKpa,
    speed_mm_s: values.speedMmS,
  };
}
