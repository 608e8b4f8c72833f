/**
 * Application shell: layout, hash routing, the serialized work queue that
 * event handlers run through, and inline error display.
 */

import { ApiError, createApiClient } from "./api.js";
import type { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { createIdentityStore } from "./identity.js";
import type { Identity, IdentityStore } from "./identity.js";
import { renderIdentityBar } from "./identityBar.js";
import { formatHash, parseHash } from "./router.js";
import type { AppRoute } from "./router.js";
import type { ModelDoc } from "./types.js";
import { renderHome } from "./views/home.js";
import { renderRecord } from "./views/record.js";
import { renderRecordedit } from "./views/recordedit.js";
import { renderRecordset } from "./views/recordset.js";

export interface AppContext {
  api: ApiClient;
  identity: IdentityStore;
  /** Mount point for the active view. */
  view: HTMLElement;
  /** Serialize an event-handler action; errors land in the inline panel. */
  run: (fn: () => Promise<void>) => Promise<void>;
  /** Change route and render. Only call from inside a `run` action. */
  goTo: (route: AppRoute) => Promise<void>;
  showError: (error: unknown) => void;
  /** Cached /model document for the current identity. */
  model: () => Promise<ModelDoc>;
}

export interface App {
  container: HTMLElement;
  api: ApiClient;
  identity: IdentityStore;
  /** Navigate from outside the queue (initial load, tests). */
  navigate: (route: AppRoute) => Promise<void>;
  /** Resolves once all queued work has finished. */
  settled: () => Promise<void>;
}

export let createApp = (
  container: HTMLElement,
  baseUrl: string,
  initialIdentity?: Identity
): App => {
  let identity = createIdentityStore(initialIdentity);
  let api = createApiClient(baseUrl, identity);

  let errorPanel = el("div", { className: "error-panel hidden", id: "error-panel" });
  let view = el("main", { className: "view", id: "view" });

  let showError = (error: unknown) => {
    let message =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : error instanceof Error
          ? error.message
          : String(error);
    errorPanel.textContent = message;
    errorPanel.classList.remove("hidden");
  };

  let clearError = () => {
    errorPanel.textContent = "";
    errorPanel.classList.add("hidden");
  };

  let tail: Promise<void> = Promise.resolve();
  let run = (fn: () => Promise<void>): Promise<void> => {
    let next = tail.then(fn).then(
      () => undefined,
      (error) => showError(error)
    );
    tail = next;
    return next;
  };

  let modelCache: Promise<ModelDoc> | null = null;
  let model = () => {
    if (modelCache === null) modelCache = api.getModel();
    return modelCache;
  };
  identity.subscribe(() => {
    modelCache = null;
  });

  let lastHash = "";

  let render = async (route: AppRoute) => {
    clearError();
    clear(view);
    if (route.app === "recordset") await renderRecordset(context, route);
    else if (route.app === "record") await renderRecord(context, route);
    else if (route.app === "recordedit") await renderRecordedit(context, route);
    else await renderHome(context);
  };

  let goTo = async (route: AppRoute) => {
    let hash = formatHash(route);
    lastHash = hash;
    if (window.location.hash !== hash) {
      window.location.hash = hash;
      // The location getter may normalize encoding; track its spelling.
      lastHash = window.location.hash;
    }
    await render(route);
  };

  let context: AppContext = { api, identity, view, run, goTo, showError, model };

  container.append(renderIdentityBar(context), errorPanel, view);

  window.addEventListener("hashchange", () => {
    if (window.location.hash === lastHash) return;
    void run(() => goTo(parseHash(window.location.hash)));
  });

  let navigate = (route: AppRoute) => run(() => goTo(route));
  let settled = () => tail;

  return { container, api, identity, navigate, settled };
};

export let bootFromLocation = (app: App): Promise<void> =>
  app.navigate(parseHash(window.location.hash));
