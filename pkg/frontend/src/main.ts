import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { getRaterId } from "./session.js";

/** Browser bootstrap. The service base URL comes from the ?service=
 * query parameter and defaults to the page's own origin (the service can
 * serve this UI directly). */
async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const serviceBase = params.get("service") ?? window.location.origin;
  const api = new ApiClient(serviceBase);
  const imageBaseUrl = params.get("images") ?? (await api.imageBaseUrl());

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const app = new App(api, root, {
    raterId: getRaterId(window.localStorage),
    imageBaseUrl,
  });
  await app.start();
}

boot().catch((err) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `Failed to start: ${String(err)}`;
});
