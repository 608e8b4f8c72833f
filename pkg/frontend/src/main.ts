/**
 * Browser entry point: mounts the app on #app against the service base URL
 * configured on the page (or the service's default port on this host).
 */

import { bootFromLocation, createApp } from "./app.js";

let mount = document.getElementById("app");
if (mount) {
  let configured = (window as unknown as { SERVICE_BASE?: string }).SERVICE_BASE;
  let base = configured ?? `http://${window.location.hostname || "127.0.0.1"}:8111`;
  let app = createApp(mount, base);
  void bootFromLocation(app);
}
