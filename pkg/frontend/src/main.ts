/** Browser entry point: join an existing session by id.
 *
 * The page is stateless beyond the session id in the URL hash
 * (#<server>|<session-id>); a reload reconstructs the view from the service.
 */

import { SessionClient } from "./api.js";
import { SessionController } from "./controller.js";
import { mount } from "./render.js";

function joinForm(root: HTMLElement): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const form = doc.createElement("form");
  form.className = "join";
  const serverInput = doc.createElement("input");
  serverInput.placeholder = "service URL, e.g. http://127.0.0.1:8000";
  serverInput.value = doc.defaultView?.location.origin ?? "";
  const sessionInput = doc.createElement("input");
  sessionInput.placeholder = "session id";
  const button = doc.createElement("button");
  button.type = "submit";
  button.textContent = "Join session";
  form.append(serverInput, sessionInput, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const server = serverInput.value.trim().replace(/\/$/, "");
    const sessionId = sessionInput.value.trim();
    if (server && sessionId) {
      doc.defaultView!.location.hash = `${server}|${sessionId}`;
      start(root);
    }
  });
  root.appendChild(form);
}

export function start(root: HTMLElement): void {
  const hash = root.ownerDocument.defaultView?.location.hash.slice(1) ?? "";
  const [server, sessionId] = hash.split("|");
  if (!server || !sessionId) {
    joinForm(root);
    return;
  }
  const controller = new SessionController(new SessionClient(decodeURIComponent(server)), sessionId);
  mount(root, controller);
}

const rootElement = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootElement) {
  start(rootElement);
}
