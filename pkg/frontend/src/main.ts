// Browser bootstrap. Everything above this file is DOM-free; this is the
// only module that touches document/window.

import { ServiceClient } from "./api.js";
import { UiController } from "./controller.js";
import { renderView } from "./render.js";

async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (app === null) {
    return;
  }
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "http://127.0.0.1:8787";
  const client = new ServiceClient(base, (url, init) => fetch(url, init));

  const sourceParam = params.get("job");
  let jobId: string;
  if (sourceParam !== null) {
    jobId = sourceParam;
  } else {
    app.textContent = "no job id: open with ?job=<id> (or ?service=<url>&job=<id>)";
    return;
  }

  const controller = new UiController(client, jobId, window);
  controller.onChange((state) => {
    app.innerHTML = renderView(state);
    wire();
  });

  function wire(): void {
    const monitor = document.getElementById("monitor") as HTMLInputElement | null;
    monitor?.addEventListener("change", () => {
      controller.setMonitorEnabled(monitor.checked);
    });
    for (const bulb of Array.from(document.querySelectorAll("button.bulb"))) {
      bulb.addEventListener("click", () => {
        const id = bulb.getAttribute("data-id");
        if (id === null) {
          return;
        }
        const choice = window.prompt(controller.menuOptions(id).join(" | "), "remove this");
        if (choice === "remove this") {
          void controller.removeThis(id);
        } else if (choice !== null && choice.startsWith("remove all in ") && choice !== "remove all in file") {
          void controller.removeAllInMethod(choice.slice("remove all in ".length));
        } else if (choice === "remove all in file") {
          void controller.removeAllInFile();
        }
      });
    }
    const refresh = document.querySelector("button.refresh");
    refresh?.addEventListener("click", () => {
      void controller.load().then(() => controller.retryPendingSelection());
    });
  }

  document.addEventListener("keydown", () => controller.keypress());
  await controller.load();
}

if (typeof document !== "undefined") {
  void boot();
}
