/** DOM construction for the listening test page.
 *
 * Slots are presented under neutral names (Clip 1..5); nothing in the
 * markup hints at how a clip was produced. Sliders start at 0 and carry an
 * "untouched" class until the listener moves them.
 */

import type { TrialState } from "./state.js";
import { canSubmit } from "./state.js";

export interface TrialHandlers {
  onSlider(slot: string, value: number): void;
  onPlayed(slot: string): void;
  onSubmit(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function must<T>(node: T | null, what: string): T {
  if (node === null) {
    throw new Error(`missing element: ${what}`);
  }
  return node;
}

export function renderTrial(
  root: HTMLElement,
  state: TrialState,
  progressText: string,
  handlers: TrialHandlers,
): void {
  root.textContent = "";

  const section = el("section", "trial");
  section.appendChild(el("p", "progress", progressText));

  const reference = el("div", "reference");
  reference.appendChild(el("h2", undefined, "Reference"));
  const refAudio = el("audio");
  refAudio.controls = true;
  refAudio.preload = "none";
  refAudio.src = state.referenceUrl;
  reference.appendChild(refAudio);
  section.appendChild(reference);

  section.appendChild(
    el(
      "p",
      "instructions",
      "Play every clip, then rate each one from 0 (bad) to 100 (excellent) against the reference.",
    ),
  );

  const list = el("ol", "slots");
  state.slots.forEach((slot, index) => {
    const item = el("li", "slot");
    item.dataset["slot"] = slot.slot;

    item.appendChild(el("span", "slot-name", `Clip ${index + 1}`));

    const audio = el("audio");
    audio.controls = true;
    audio.preload = "none";
    audio.src = slot.clipUrl;
    audio.dataset["slotAudio"] = slot.slot;
    audio.addEventListener("ended", () => {
      handlers.onPlayed(slot.slot);
      syncTrial(root, state);
    });
    item.appendChild(audio);

    const slider = el("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "100";
    slider.step = "1";
    slider.value = String(slot.value);
    slider.classList.add("score");
    slider.classList.toggle("untouched", !slot.touched);
    slider.dataset["slotSlider"] = slot.slot;
    slider.addEventListener("input", () => {
      handlers.onSlider(slot.slot, Number(slider.value));
      syncTrial(root, state);
    });
    item.appendChild(slider);

    item.appendChild(el("output", "score-value", String(slot.value)));

    list.appendChild(item);
  });
  section.appendChild(list);

  const status = el("p", "status");
  status.setAttribute("role", "status");
  section.appendChild(status);

  const submit = el("button", "submit", "Submit ratings");
  submit.type = "button";
  submit.disabled = true;
  submit.addEventListener("click", () => {
    handlers.onSubmit();
  });
  section.appendChild(submit);

  root.appendChild(section);
  syncTrial(root, state);
}

/** Refresh slider classes, score readouts, and the submit gate. */
export function syncTrial(root: HTMLElement, state: TrialState): void {
  for (const slot of state.slots) {
    const slider = must(
      root.querySelector<HTMLInputElement>(`[data-slot-slider="${slot.slot}"]`),
      `slider ${slot.slot}`,
    );
    slider.value = String(slot.value);
    slider.classList.toggle("untouched", !slot.touched);
    const item = must(
      root.querySelector<HTMLElement>(`[data-slot="${slot.slot}"]`),
      `slot ${slot.slot}`,
    );
    item.classList.toggle("played", slot.played);
    must(item.querySelector("output"), "score readout").textContent = String(slot.value);
  }
  const submit = must(
    root.querySelector<HTMLButtonElement>("button.submit"),
    "submit button",
  );
  submit.disabled = !canSubmit(state);
}

export function showStatus(
  root: HTMLElement,
  message: string,
  retry?: () => void,
): void {
  const status = must(root.querySelector<HTMLElement>(".status"), "status area");
  status.textContent = message;
  status.classList.add("error");
  if (retry) {
    const button = el("button", "retry", "Retry");
    button.type = "button";
    button.addEventListener("click", () => {
      status.textContent = "";
      status.classList.remove("error");
      retry();
    });
    status.appendChild(button);
  }
}

export function setBusy(root: HTMLElement, busy: boolean): void {
  const submit = root.querySelector<HTMLButtonElement>("button.submit");
  if (submit) {
    submit.disabled = busy;
    submit.textContent = busy ? "Submitting…" : "Submit ratings";
  }
}

export interface MessageAction {
  label: string;
  onClick: () => void;
}

export function renderMessage(
  root: HTMLElement,
  heading: string,
  body: string,
  action?: MessageAction,
): void {
  root.textContent = "";
  const section = el("section", "notice");
  section.appendChild(el("h2", undefined, heading));
  section.appendChild(el("p", undefined, body));
  if (action) {
    const button = el("button", "action", action.label);
    button.type = "button";
    button.addEventListener("click", action.onClick);
    section.appendChild(button);
  }
  root.appendChild(section);
}

export function renderCompletion(root: HTMLElement, sessionCode: string): void {
  root.textContent = "";
  const section = el("section", "completion");
  section.appendChild(el("h2", undefined, "All trials complete"));
  section.appendChild(el("p", undefined, "Thank you for listening. Your session code:"));
  section.appendChild(el("code", "session-code", sessionCode));
  root.appendChild(section);
}
