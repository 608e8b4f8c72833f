/**
 * Small DOM construction helpers.
 *
 * Untrusted text always goes through textContent; `html()` is reserved for
 * server-rendered fragments, which arrive already sanitized.
 */

export interface ElOptions {
  className?: string;
  id?: string;
  text?: string;
  title?: string;
  href?: string;
  type?: string;
  value?: string;
  placeholder?: string;
  disabled?: boolean;
  checked?: boolean;
  target?: string;
  colSpan?: number;
  dataset?: Record<string, string>;
}

export let el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  options: ElOptions = {},
  children: (Node | string)[] = []
): HTMLElementTagNameMap[K] => {
  let node = document.createElement(tag);
  if (options.className !== undefined) node.className = options.className;
  if (options.id !== undefined) node.id = options.id;
  if (options.text !== undefined) node.textContent = options.text;
  if (options.title !== undefined) node.title = options.title;
  if (options.href !== undefined) (node as unknown as HTMLAnchorElement).href = options.href;
  if (options.target !== undefined) (node as unknown as HTMLAnchorElement).target = options.target;
  if (options.type !== undefined) (node as unknown as HTMLInputElement).type = options.type;
  if (options.value !== undefined) (node as unknown as HTMLInputElement).value = options.value;
  if (options.placeholder !== undefined) {
    (node as unknown as HTMLInputElement).placeholder = options.placeholder;
  }
  if (options.disabled !== undefined) {
    (node as unknown as HTMLInputElement).disabled = options.disabled;
  }
  if (options.checked !== undefined) (node as unknown as HTMLInputElement).checked = options.checked;
  if (options.colSpan !== undefined) {
    (node as unknown as HTMLTableCellElement).colSpan = options.colSpan;
  }
  if (options.dataset) {
    for (let [key, value] of Object.entries(options.dataset)) node.dataset[key] = value;
  }
  for (let child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
};

/** Container for a server-rendered HTML fragment. */
export let html = (fragment: string, className?: string): HTMLElement => {
  let node = document.createElement("span");
  if (className !== undefined) node.className = className;
  node.innerHTML = fragment;
  return node;
};

export let clear = (node: HTMLElement): void => {
  while (node.firstChild) node.removeChild(node.firstChild);
};
