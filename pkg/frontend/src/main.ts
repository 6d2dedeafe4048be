// Browser entry point. Query parameters pick the backend and session:
//   index.html?base=http://127.0.0.1:8000&session=my-session
// With no session parameter a small form creates one first.

import { ElicitClient } from "./api.js";
import { SessionController } from "./controller.js";
import { render } from "./heatmap.js";

function mount(client: ElicitClient, sessionId: string, container: HTMLElement): void {
  const controller = new SessionController(client, sessionId, (view) => {
    render(container, view, {
      onToggle: (feature, value) => controller.setToggle(feature, value),
      onSubmit: () => void controller.submit(),
    });
    const queryButton = document.querySelector<HTMLButtonElement>("#next-query");
    if (queryButton) {
      queryButton.disabled = view.terminal || view.columns.length > 0 || view.updating;
    }
  });
  document.querySelector<HTMLButtonElement>("#next-query")?.addEventListener("click", () => {
    void controller.requestQuery();
  });
  void controller.initialize();
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8000";
  const client = new ElicitClient(base);
  const container = document.querySelector<HTMLElement>("#app");
  if (!container) throw new Error("missing #app container");

  const existing = params.get("session");
  if (existing) {
    mount(client, existing, container);
    return;
  }

  const form = document.querySelector<HTMLFormElement>("#create-form");
  if (!form) throw new Error("missing #create-form");
  form.hidden = false;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    void client
      .createSession({
        condition: String(data.get("condition") ?? "c3"),
        seed: Number(data.get("seed") ?? 0),
      })
      .then((view) => {
        form.hidden = true;
        mount(client, view.id, container);
      })
      .catch((err) => {
        const banner = document.querySelector<HTMLElement>("#boot-error");
        if (banner) banner.textContent = String(err);
      });
  });
}

boot();
