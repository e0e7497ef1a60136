/**
 * The editor-link page: the token in the URL is the whole credential.
 * Loads the element, shows the same schema-driven form pre-filled, saves via
 * PUT (explaining re-approval when the content returns to the queue), and
 * deletes behind a confirmation step. Dead links get a friendly page.
 */

import { ApiError, IntakeClient, type EditView } from "./api.js";
import { clear, h } from "./dom.js";
import { buildSchemaForm } from "./form.js";

export interface EditorConfig {
  apiBaseUrl: string;
  token: string;
}

export interface EditorHandle {
  refresh(): Promise<void>;
}

export async function renderEditorPage(
  container: HTMLElement,
  config: EditorConfig,
): Promise<EditorHandle> {
  const client = new IntakeClient(config.apiBaseUrl);
  const root = h("div", { class: "oi-editor", dataset: { openIntake: "editor" } });
  clear(container);
  container.append(root);

  function renderInvalid(reason: "unknown" | "revoked" | "gone"): void {
    clear(root);
    const message =
      reason === "revoked"
        ? "This edit link was revoked by the site owner."
        : reason === "gone"
          ? "The content this link pointed to no longer exists."
          : "This edit link is not valid.";
    root.append(
      h("div", { class: "oi-invalid", dataset: { editorState: "invalid", reason } },
        h("h3", {}, "Link not usable"),
        h("p", {}, message),
        h("p", {}, "If you believe this is a mistake, contact the site owner for a fresh link."),
      ),
    );
  }

  function renderView(view: EditView): void {
    const form = buildSchemaForm(view.schema, view.element.values);
    const notice = h("p", { class: "oi-editor-note", dataset: { role: "editor-note" }, hidden: true });
    const wasAccepted = view.element.status === "accepted";

    const deleteButton = h("button", {
      type: "button",
      class: "oi-delete",
      dataset: { action: "delete" },
      onClick: async () => {
        if (deleteButton.dataset.armed !== "1") {
          deleteButton.dataset.armed = "1";
          deleteButton.textContent = "Really delete? Click again.";
          return;
        }
        try {
          await client.deleteViaLink(config.token);
          clear(root);
          root.append(
            h("p", { dataset: { editorState: "deleted" } }, "Your content was removed."),
          );
        } catch (err) {
          notice.textContent = err instanceof Error ? err.message : "Delete failed.";
          notice.hidden = false;
        }
      },
    }, "Delete");

    clear(root);
    root.append(
      h("form", {
        class: "oi-editor-form",
        dataset: { editorState: "form", status: view.element.status },
        onSubmit: async (event: Event) => {
          event.preventDefault();
          form.clearErrors();
          try {
            const saved = await client.saveEdit(config.token, form.read());
            notice.textContent =
              saved.status === "pending" && wasAccepted
                ? "Saved. Your changes are awaiting re-approval by the site owner."
                : "Saved.";
            notice.hidden = false;
            (root.querySelector("[data-editor-state]") as HTMLElement).dataset.status =
              saved.status;
          } catch (err) {
            if (err instanceof ApiError && err.status === 422 && err.fields) {
              form.setErrors(err.fields);
            } else {
              notice.textContent = err instanceof Error ? err.message : "Save failed.";
              notice.hidden = false;
            }
          }
        },
      },
        h("h3", {}, `Edit your ${view.schema.label.toLowerCase()}`),
        form.root,
        notice,
        h("div", { class: "oi-editor-actions" },
          h("button", { type: "submit", class: "oi-save", dataset: { action: "save" } }, "Save"),
          deleteButton,
        ),
      ),
    );
  }

  async function load(): Promise<void> {
    try {
      renderView(await client.editView(config.token));
    } catch (err) {
      if (err instanceof ApiError && err.status === 410) renderInvalid("revoked");
      else if (err instanceof ApiError && err.status === 404)
        renderInvalid(err.code === "element_gone" ? "gone" : "unknown");
      else {
        clear(root);
        root.append(
          h("div", { dataset: { editorState: "error" } },
            h("p", {}, "Could not load your content."),
            h("button", { type: "button", onClick: () => { void load(); } }, "Try again"),
          ),
        );
      }
    }
  }

  await load();
  return { refresh: load };
}
