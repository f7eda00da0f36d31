/** Session and per-trial state, including the submit gate.
 *
 * A trial may be submitted only after every clip has finished playing at
 * least once and every slider has been moved by the listener. Drafts and
 * session progress persist through a Storage-shaped object so a reload
 * restores sliders and never re-presents a submitted trial.
 */
export function newTrialState(payload) {
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
function findSlot(state, slot) {
    const found = state.slots.find((s) => s.slot === slot);
    if (!found) {
        throw new Error(`unknown slot ${slot}`);
    }
    return found;
}
export function touchSlider(state, slot, value) {
    if (!Number.isInteger(value) || value < 0 || value > 100) {
        throw new Error(`score ${value} outside 0..100`);
    }
    const target = findSlot(state, slot);
    target.value = value;
    target.touched = true;
}
export function markPlayed(state, slot) {
    findSlot(state, slot).played = true;
}
export function canSubmit(state) {
    return state.slots.every((s) => s.touched && s.played);
}
export function scoresPayload(state) {
    const scores = {};
    for (const slot of state.slots) {
        scores[slot.slot] = slot.value;
    }
    return scores;
}
// ------------------------------------------------------------- persistence
const SESSION_KEY = "listening-test/session";
function draftKey(trialId) {
    return `listening-test/draft/${trialId}`;
}
export function saveSession(storage, progress) {
    storage.setItem(SESSION_KEY, JSON.stringify(progress));
}
export function loadSession(storage) {
    const raw = storage.getItem(SESSION_KEY);
    if (raw === null) {
        return null;
    }
    try {
        const parsed = JSON.parse(raw);
        if (typeof parsed.listenerId !== "string" ||
            !Array.isArray(parsed.trials) ||
            !Array.isArray(parsed.completed)) {
            return null;
        }
        return parsed;
    }
    catch {
        return null;
    }
}
export function clearSession(storage) {
    storage.removeItem(SESSION_KEY);
}
export function nextTrialId(progress) {
    const done = new Set(progress.completed);
    return progress.trials.find((id) => !done.has(id)) ?? null;
}
export function markCompleted(storage, progress, trialId) {
    if (!progress.completed.includes(trialId)) {
        progress.completed.push(trialId);
    }
    saveSession(storage, progress);
    clearDraft(storage, trialId);
}
export function saveDraft(storage, state) {
    const slots = state.slots.map((s) => ({
        slot: s.slot,
        value: s.value,
        touched: s.touched,
        played: s.played,
    }));
    storage.setItem(draftKey(state.trialId), JSON.stringify(slots));
}
export function restoreDraft(storage, state) {
    const raw = storage.getItem(draftKey(state.trialId));
    if (raw === null) {
        return;
    }
    let slots;
    try {
        slots = JSON.parse(raw);
    }
    catch {
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
export function clearDraft(storage, trialId) {
    storage.removeItem(draftKey(trialId));
}
