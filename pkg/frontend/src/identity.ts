/**
 * Development identity store.
 *
 * The service authenticates from X-Client-Id / X-Client-Roles headers; this
 * store is the single place the client keeps the acting identity and turns
 * it into headers. An empty id means anonymous (no headers sent).
 */

export interface Identity {
  id: string | null;
  roles: string[];
}

export type IdentityListener = (identity: Identity) => void;

export interface IdentityStore {
  get: () => Identity;
  set: (id: string | null, roles: string[]) => void;
  headers: () => Record<string, string>;
  subscribe: (fn: IdentityListener) => () => void;
}

export let anonymous = (): Identity => ({ id: null, roles: [] });

export let createIdentityStore = (initial?: Identity): IdentityStore => {
  let current: Identity = initial ?? anonymous();
  let listeners: IdentityListener[] = [];

  let get = () => current;

  let set = (id: string | null, roles: string[]) => {
    let cleanId = id && id.trim() ? id.trim() : null;
    let cleanRoles = roles.map((r) => r.trim()).filter((r) => r.length > 0);
    current = { id: cleanId, roles: cleanRoles };
    for (let fn of [...listeners]) fn(current);
  };

  let headers = (): Record<string, string> => {
    if (current.id === null) return {};
    let out: Record<string, string> = { "X-Client-Id": current.id };
    if (current.roles.length > 0) out["X-Client-Roles"] = current.roles.join(",");
    return out;
  };

  let subscribe = (fn: IdentityListener) => {
    listeners.push(fn);
    return () => {
      listeners = listeners.filter((x) => x !== fn);
    };
  };

  return { get, set, headers, subscribe };
};
