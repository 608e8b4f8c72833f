/**
 * Development identity selector: writes the store that backs the
 * X-Client-Id / X-Client-Roles request headers and re-renders the current
 * route so visible controls track the new rights.
 */

import { el } from "./dom.js";
import { parseHash } from "./router.js";
import type { AppContext } from "./app.js";

export let renderIdentityBar = (ctx: AppContext): HTMLElement => {
  let current = ctx.identity.get();

  let idInput = el("input", {
    id: "identity-id",
    type: "text",
    value: current.id ?? "",
    placeholder: "anonymous",
  });
  let rolesInput = el("input", {
    id: "identity-roles",
    type: "text",
    value: current.roles.join(","),
    placeholder: "roles, comma separated",
  });
  let status = el("span", { className: "identity-current", id: "identity-current" });

  let describe = () => {
    let identity = ctx.identity.get();
    status.textContent =
      identity.id === null ? "anonymous" : `${identity.id} (${identity.roles.join(", ") || "no roles"})`;
  };
  describe();
  ctx.identity.subscribe(describe);

  let apply = el("button", { id: "identity-apply", type: "button", text: "Apply" });
  apply.addEventListener("click", () => {
    void ctx.run(async () => {
      ctx.identity.set(idInput.value, rolesInput.value.split(","));
      await ctx.goTo(parseHash(window.location.hash));
    });
  });

  return el("div", { className: "identity-bar" }, [
    el("a", { className: "brand", href: "#/", text: "Catalog" }),
    el("label", { text: "Identity:" }),
    idInput,
    rolesInput,
    apply,
    status,
  ]);
};
