import { ApiClient } from "./api.js";
import { SessionController } from "./state.js";
import {
  compareKeyHandler,
  renderCompareTask,
  renderCompletion,
  renderError,
  renderSortTask,
} from "./views.js";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "";
}

export async function showSession(root: HTMLElement, api: ApiClient, sessionId: string): Promise<SessionController> {
  const controller = new SessionController(api, sessionId);
  const stage = document.createElement("div");
  stage.id = "stage";
  root.replaceChildren(stage);

  controller.onChange((state) => {
    if (state.error) renderError(root, state.error);
    if (state.done) {
      void api.exportRanking(sessionId).then((payload) => {
        renderCompletion(stage, api, payload);
      });
      return;
    }
    if (!state.task || state.pending) return;
    if (state.task.kind === "sort") {
      renderSortTask(stage, api, controller, state.task);
    } else {
      renderCompareTask(stage, api, controller, state.task);
    }
  });
  window.addEventListener("keydown", compareKeyHandler(controller));
  await controller.refresh();
  return controller;
}

function showLauncher(root: HTMLElement, api: ApiClient): void {
  const form = document.createElement("form");
  form.innerHTML = `
    <h2>Start an annotation session</h2>
    <label>Item ids, one per line
      <textarea name="ids" rows="8" data-testid="ids"></textarea>
    </label>
    <label>Sub-list size <input name="n_sub" type="number" value="6" min="2" max="12"></label>
    <button type="submit" data-testid="create">Create session</button>
  `;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const ids = (form.elements.namedItem("ids") as HTMLTextAreaElement).value
      .split("\n")
      .map((s) => s.trim())
      .filter(Boolean);
    const nSub = Number((form.elements.namedItem("n_sub") as HTMLInputElement).value);
    void api.createSession(ids, nSub).then((manifest) => {
      const url = new URL(window.location.href);
      url.searchParams.set("session", manifest.session_id);
      window.location.assign(url.toString());
    });
  });
  root.replaceChildren(form);
}

export async function bootstrap(root: HTMLElement): Promise<void> {
  const api = new ApiClient(apiBase());
  const sessionId = new URLSearchParams(window.location.search).get("session");
  if (sessionId) {
    await showSession(root, api, sessionId);
  } else {
    showLauncher(root, api);
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void bootstrap(document.getElementById("app")!);
}
