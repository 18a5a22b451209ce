import { ApiClient } from "./api.js";
import { SessionController, moveItem } from "./state.js";
import type { CompareTask, ExportPayload, SortTask } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function itemTile(api: ApiClient, itemId: string): HTMLElement {
  const tile = el("div", "tile");
  tile.dataset.itemId = itemId;
  const img = el("img", "tile-image");
  img.src = api.imageUrl(itemId);
  img.alt = itemId;
  img.onerror = () => {
    img.remove();
    tile.classList.add("tile-placeholder");
  };
  tile.append(img, el("div", "tile-label", itemId));
  return tile;
}

function progressLine(answered: number, remaining: number): HTMLElement {
  return el("div", "progress", `answered ${answered} · about ${remaining} to go`);
}

/**
 * Ordered-list view for an initial sub-list: best first. Tiles reorder by
 * drag-and-drop or the per-tile up/down buttons; submit sends the whole
 * permutation.
 */
export function renderSortTask(
  root: HTMLElement,
  api: ApiClient,
  controller: SessionController,
  task: SortTask,
): void {
  root.replaceChildren();
  let order = task.ids.slice();

  const heading = el("h2", undefined, `Sort these ${order.length} items, best first`);
  const list = el("div", "sort-list");
  list.dataset.testid = "sort-list";

  const redraw = () => {
    list.replaceChildren();
    order.forEach((id, idx) => {
      const row = el("div", "sort-row");
      row.draggable = true;
      row.dataset.itemId = id;
      row.addEventListener("dragstart", (ev) => {
        ev.dataTransfer?.setData("text/plain", String(idx));
      });
      row.addEventListener("dragover", (ev) => ev.preventDefault());
      row.addEventListener("drop", (ev) => {
        ev.preventDefault();
        const from = Number(ev.dataTransfer?.getData("text/plain"));
        if (!Number.isNaN(from)) {
          order = moveItem(order, from, idx);
          redraw();
        }
      });

      const up = el("button", "move-up", "▲");
      up.disabled = idx === 0;
      up.addEventListener("click", () => {
        order = moveItem(order, idx, idx - 1);
        redraw();
      });
      const down = el("button", "move-down", "▼");
      down.disabled = idx === order.length - 1;
      down.addEventListener("click", () => {
        order = moveItem(order, idx, idx + 1);
        redraw();
      });

      row.append(
        el("span", "position", String(idx + 1)),
        itemTile(api, id),
        up,
        down,
      );
      list.append(row);
    });
  };
  redraw();

  const submit = el("button", "submit-order", "Submit order");
  submit.dataset.testid = "submit-order";
  submit.addEventListener("click", () => void controller.submitSort(order));

  root.append(
    heading,
    list,
    submit,
    progressLine(task.progress.answered, task.progress.estimated_remaining),
  );
}

/** Two-image choice; click or ArrowLeft/ArrowRight pick, undo button reverts. */
export function renderCompareTask(
  root: HTMLElement,
  api: ApiClient,
  controller: SessionController,
  task: CompareTask,
): void {
  root.replaceChildren();
  const heading = el("h2", undefined, "Pick the better item");
  const pair = el("div", "compare-pair");

  const make = (id: string, side: "left" | "right") => {
    const button = el("button", `choice choice-${side}`);
    button.dataset.testid = `choice-${side}`;
    button.dataset.itemId = id;
    button.append(itemTile(api, id));
    button.addEventListener("click", () => void controller.submitChoice(id));
    return button;
  };
  pair.append(make(task.id_a, "left"), make(task.id_b, "right"));

  const undo = el("button", "undo", "Undo last answer");
  undo.dataset.testid = "undo";
  undo.addEventListener("click", () => void controller.undo());

  root.append(
    heading,
    pair,
    undo,
    progressLine(task.progress.answered, task.progress.estimated_remaining),
  );
}

export function compareKeyHandler(controller: SessionController) {
  return (ev: KeyboardEvent): void => {
    const task = controller.state.task;
    if (!task || task.kind !== "compare") return;
    if (ev.key === "ArrowLeft") void controller.submitChoice(task.id_a);
    if (ev.key === "ArrowRight") void controller.submitChoice(task.id_b);
  };
}

/** Final ranking strip plus a download of the export payload. */
export function renderCompletion(
  root: HTMLElement,
  api: ApiClient,
  payload: ExportPayload,
): void {
  root.replaceChildren();
  const heading = el("h2", undefined, "Ranking complete");
  const strip = el("div", "ranking-strip");
  strip.dataset.testid = "ranking-strip";
  const byRank = payload.ranking.slice().sort((a, b) => b.rank - a.rank);
  for (const entry of byRank) {
    const cell = el("div", "ranked-tile");
    cell.dataset.itemId = entry.id;
    cell.dataset.rank = String(entry.rank);
    cell.append(itemTile(api, entry.id), el("div", "rank-label", `#${entry.rank}`));
    strip.append(cell);
  }

  const download = el("a", "download", "Download ranking (JSON)");
  download.dataset.testid = "download";
  const blob = new Blob([JSON.stringify(payload)], { type: "application/json" });
  download.href = URL.createObjectURL(blob);
  (download as HTMLAnchorElement).download = `${payload.session_id}-ranking.json`;

  root.append(heading, strip, download);
}

export function renderError(root: HTMLElement, message: string): void {
  let banner = root.querySelector<HTMLElement>(".error-banner");
  if (!banner) {
    banner = el("div", "error-banner");
    root.prepend(banner);
  }
  banner.textContent = message;
}
