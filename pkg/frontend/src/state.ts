/** Session and per-trial state, including the submit gate.
 *
 * A trial may be submitted only after every clip has finished playing at
 * least once and every slider has been moved by the listener. Drafts and
 * session progress persist through a Storage-shaped object so a reload
 * restores sliders and never re-presents a submitted trial.
 */

import type { TrialPayload } from "./api.js";

export interface SlotState {
  slot: string;
  clipUrl: string;
  value: number;
  touched: boolean;
  played: boolean;
}

export interface TrialState {
  trialId: string;
  referenceUrl: string;
  slots: SlotState[];
}

export interface SessionProgress {
  listenerId: string;
  trials: string[];
  completed: string[];
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function newTrialState(payload: TrialPayload): TrialState {
  return {
    trialId: payload.trial_id,
    referenceUrl: payload.reference_url,
    slots: payload.clips.map((clip) => ({
      slot: clip.slot,
      clipUrl: clip.clip_url,
      value: 0,
      touched: false,
      played: false,
    })),
  };
}

function findSlot(state: TrialState, slot: string): SlotState {
  const found = state.slots.find((s) => s.slot === slot);
  if (!found) {
    throw new Error(`unknown slot ${slot}`);
  }
  return found;
}

export function touchSlider(state: TrialState, slot: string, value: number): void {
  if (!Number.isInteger(value) || value < 0 || value > 100) {
    throw new Error(`score ${value} outside 0..100`);
  }
  const target = findSlot(state, slot);
  target.value = value;
  target.touched = true;
}

export function markPlayed(state: TrialState, slot: string): void {
  findSlot(state, slot).played = true;
}

export function canSubmit(state: TrialState): boolean {
  return state.slots.every((s) => s.touched && s.played);
}

export function scoresPayload(state: TrialState): Record<string, number> {
  const scores: Record<string, number> = {};
  for (const slot of state.slots) {
    scores[slot.slot] = slot.value;
  }
  return scores;
}

// ------------------------------------------------------------- persistence

const SESSION_KEY = "listening-test/session";

function draftKey(trialId: string): string {
  return `listening-test/draft/${trialId}`;
}

export function saveSession(storage: StorageLike, progress: SessionProgress): void {
  storage.setItem(SESSION_KEY, JSON.stringify(progress));
}

export function loadSession(storage: StorageLike): SessionProgress | null {
  const raw = storage.getItem(SESSION_KEY);
  if (raw === null) {
    return null;
  }
  try {
    const parsed = JSON.parse(raw) as SessionProgress;
    if (
      typeof parsed.listenerId !== "string" ||
      !Array.isArray(parsed.trials) ||
      !Array.isArray(parsed.completed)
    ) {
      return null;
    }
    return parsed;
  } catch {
    return null;
  }
}

export function clearSession(storage: StorageLike): void {
  storage.removeItem(SESSION_KEY);
}

export function nextTrialId(progress: SessionProgress): string | null {
  const done = new Set(progress.completed);
  return progress.trials.find((id) => !done.has(id)) ?? null;
}

export function markCompleted(
  storage: StorageLike,
  progress: SessionProgress,
  trialId: string,
): void {
  if (!progress.completed.includes(trialId)) {
    progress.completed.push(trialId);
  }
  saveSession(storage, progress);
  clearDraft(storage, trialId);
}

interface DraftSlot {
  slot: string;
  value: number;
  touched: boolean;
  played: boolean;
}

export function saveDraft(storage: StorageLike, state: TrialState): void {
  const slots: DraftSlot[] = state.slots.map((s) => ({
    slot: s.slot,
    value: s.value,
    touched: s.touched,
    played: s.played,
  }));
  storage.setItem(draftKey(state.trialId), JSON.stringify(slots));
}

export function restoreDraft(storage: StorageLike, state: TrialState): void {
  const raw = storage.getItem(draftKey(state.trialId));
  if (raw === null) {
    return;
  }
  let slots: DraftSlot[];
  try {
    slots = JSON.parse(raw) as DraftSlot[];
  } catch {
    return;
  }
  for (const draft of slots) {
    const target = state.slots.find((s) => s.slot === draft.slot);
    if (target) {
      target.value = draft.value;
      target.touched = draft.touched;
      target.played = draft.played;
    }
  }
}

export function clearDraft(storage: StorageLike, trialId: string): void {
  storage.removeItem(draftKey(trialId));
}
