/** DOM rendering for the two-choice screen, progress, and live ranking. */

import { SessionController, Side, ViewState } from "./controller.js";

const IMAGE_PATTERN = /^(https?:\/\/\S+\.(png|jpe?g|gif|webp|svg)(\?\S*)?|data:image\/)/i;

export function isImagePayload(payload: string): boolean {
  return IMAGE_PATTERN.test(payload);
}

function stimulus(doc: Document, payload: string, item: number): HTMLElement {
  if (isImagePayload(payload)) {
    const img = doc.createElement("img");
    img.src = payload;
    img.alt = `item ${item}`;
    img.className = "stimulus-image";
    return img;
  }
  const div = doc.createElement("div");
  div.className = "stimulus-text";
  div.textContent = payload; // verbatim, never interpreted as markup
  return div;
}

function choiceCard(
  doc: Document,
  side: Side,
  payload: string,
  item: number,
  onChoose: (side: Side) => void,
): HTMLElement {
  const button = doc.createElement("button");
  button.className = `choice choice-${side}`;
  button.dataset.side = side;
  button.appendChild(stimulus(doc, payload, item));
  const hint = doc.createElement("span");
  hint.className = "hint";
  hint.textContent = side === "left" ? "←" : "→";
  button.appendChild(hint);
  button.addEventListener("click", () => onChoose(side));
  return button;
}

function rankingPanel(doc: Document, state: ViewState): HTMLElement {
  const panel = doc.createElement("section");
  panel.className = "ranking";
  const heading = doc.createElement("h2");
  heading.textContent = "Current ranking";
  panel.appendChild(heading);
  const list = doc.createElement("ol");
  for (const entry of state.ranking ?? []) {
    const row = doc.createElement("li");
    row.dataset.item = String(entry.item);
    const label = doc.createElement("span");
    label.className = "ranking-label";
    label.textContent = `item ${entry.item}`;
    const score = doc.createElement("span");
    score.className = "ranking-score";
    score.textContent =
      entry.std === null ? entry.score.toFixed(3) : `${entry.score.toFixed(3)} ± ${entry.std.toFixed(3)}`;
    row.appendChild(label);
    row.appendChild(score);
    if (entry.std !== null) {
      const bar = doc.createElement("div");
      bar.className = "uncertainty-bar";
      bar.style.width = `${Math.min(100, entry.std * 100)}px`;
      row.appendChild(bar);
    }
    list.appendChild(row);
  }
  panel.appendChild(list);
  return panel;
}

export function render(
  root: HTMLElement,
  state: ViewState,
  controller: SessionController,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const status = doc.createElement("p");
  status.className = "status";
  status.dataset.phase = state.phase;
  status.textContent =
    state.phase === "retrying"
      ? `offline, retrying… (${state.answered} answered)`
      : `${state.answered} comparisons answered`;
  root.appendChild(status);

  if (state.phase === "error") {
    const banner = doc.createElement("p");
    banner.className = "error-banner";
    banner.textContent = state.error ?? "something went wrong";
    root.appendChild(banner);
    return;
  }

  if (state.phase === "exhausted") {
    const done = doc.createElement("section");
    done.className = "completion";
    const message = doc.createElement("p");
    message.textContent = "All comparisons answered. Thank you!";
    done.appendChild(message);
    const link = doc.createElement("a");
    link.className = "export-link";
    link.href = controller.client.exportUrl(controller.sessionId);
    link.textContent = "Download session export";
    done.appendChild(link);
    root.appendChild(done);
    root.appendChild(rankingPanel(doc, state));
    return;
  }

  if (state.pair !== null && state.payloads !== null) {
    const question = doc.createElement("h1");
    question.className = "question";
    question.textContent = "Which ranks higher?";
    root.appendChild(question);
    const board = doc.createElement("div");
    board.className = "board";
    const choose = (side: Side) => void controller.choose(side);
    board.appendChild(choiceCard(doc, "left", state.payloads[0], state.pair[0], choose));
    board.appendChild(choiceCard(doc, "right", state.payloads[1], state.pair[1], choose));
    root.appendChild(board);
  } else {
    const loading = doc.createElement("p");
    loading.className = "loading";
    loading.textContent = "loading…";
    root.appendChild(loading);
  }

  root.appendChild(rankingPanel(doc, state));
}

/** Wire keyboard arrows to the two choices; returns the teardown. */
export function bindKeyboard(doc: Document, controller: SessionController): () => void {
  const handler = (event: KeyboardEvent) => {
    if (event.key === "ArrowLeft") {
      void controller.choose("left");
    } else if (event.key === "ArrowRight") {
      void controller.choose("right");
    }
  };
  doc.addEventListener("keydown", handler);
  return () => doc.removeEventListener("keydown", handler);
}

export function mount(root: HTMLElement, controller: SessionController): void {
  controller.onChange((state) => render(root, state, controller));
  bindKeyboard(root.ownerDocument, controller);
  void controller.refresh().then(() => controller.refreshRanking());
}
