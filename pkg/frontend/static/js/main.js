/** Page controller: session bootstrap, trial flow, submission.
 *
 * One listener per page. The session (listener id, trial order, completed
 * trials) lives in localStorage so a reload resumes where the listener left
 * off instead of minting a new session.
 */
import { ApiClient, ApiError, DuplicateSubmissionError } from "./api.js";
import { canSubmit, clearSession, loadSession, markCompleted, markPlayed, newTrialState, nextTrialId, restoreDraft, saveDraft, saveSession, scoresPayload, touchSlider, } from "./state.js";
import { renderCompletion, renderMessage, renderTrial, setBusy, showStatus, syncTrial, } from "./render.js";
function describeError(err) {
    if (err instanceof ApiError) {
        return err.message;
    }
    if (err instanceof Error) {
        return `Could not reach the server (${err.message}).`;
    }
    return "Could not reach the server.";
}
async function obtainSession(deps) {
    const existing = loadSession(deps.storage);
    if (existing !== null) {
        return existing;
    }
    const session = await deps.client.createSession();
    const progress = {
        listenerId: session.listener_id,
        trials: session.trials,
        completed: [],
    };
    saveSession(deps.storage, progress);
    return progress;
}
async function showTrial(deps, progress) {
    const trialId = nextTrialId(progress);
    if (trialId === null) {
        renderCompletion(deps.root, progress.listenerId);
        return;
    }
    let payload;
    try {
        payload = await deps.client.fetchTrial(trialId, progress.listenerId);
    }
    catch (err) {
        if (err instanceof ApiError && err.status === 404) {
            // The service no longer knows this session; start over.
            clearSession(deps.storage);
            renderMessage(deps.root, "Session expired", "The service does not recognise this session. Reload to start a new one.");
            return;
        }
        renderMessage(deps.root, "Connection problem", describeError(err), {
            label: "Retry",
            onClick: () => {
                void showTrial(deps, progress);
            },
        });
        return;
    }
    const state = newTrialState(payload);
    restoreDraft(deps.storage, state);
    const position = progress.trials.indexOf(trialId) + 1;
    const progressText = `Trial ${position} of ${progress.trials.length}`;
    let submitting = false;
    const submit = async () => {
        if (submitting || !canSubmit(state)) {
            return;
        }
        submitting = true;
        setBusy(deps.root, true);
        try {
            await deps.client.submitRatings(progress.listenerId, state.trialId, scoresPayload(state));
        }
        catch (err) {
            submitting = false;
            if (err instanceof DuplicateSubmissionError) {
                // Already recorded server-side; treat the trial as done.
                markCompleted(deps.storage, progress, state.trialId);
                renderMessage(deps.root, "Already recorded", "Ratings for this trial were received earlier and cannot be changed.", {
                    label: "Continue",
                    onClick: () => {
                        void showTrial(deps, progress);
                    },
                });
                return;
            }
            setBusy(deps.root, false);
            syncTrial(deps.root, state);
            showStatus(deps.root, describeError(err), () => {
                void submit();
            });
            return;
        }
        markCompleted(deps.storage, progress, state.trialId);
        await showTrial(deps, progress);
    };
    renderTrial(deps.root, state, progressText, {
        onSlider: (slot, value) => {
            touchSlider(state, slot, value);
            saveDraft(deps.storage, state);
        },
        onPlayed: (slot) => {
            markPlayed(state, slot);
            saveDraft(deps.storage, state);
        },
        onSubmit: () => {
            void submit();
        },
    });
}
export async function startApp(deps) {
    let progress;
    try {
        progress = await obtainSession(deps);
    }
    catch (err) {
        renderMessage(deps.root, "Connection problem", describeError(err), {
            label: "Retry",
            onClick: () => {
                void startApp(deps);
            },
        });
        return;
    }
    await showTrial(deps, progress);
}
const mount = typeof document === "undefined" ? null : document.getElementById("app");
if (mount !== null) {
    void startApp({
        client: new ApiClient(),
        storage: window.localStorage,
        root: mount,
    });
}
