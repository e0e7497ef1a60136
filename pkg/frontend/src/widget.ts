/**
 * The embeddable "Add your information" widget.
 *
 * Mounts into a host-page element, renders a form generated from the
 * section's published type schemas, and submits to the public endpoint.
 * Success shows the resulting status (pending content explains the review
 * step); validation failures render inline next to their fields; rate
 * limiting shows a cool-down note; network failures offer a retry.
 */

import { ApiError, IntakeClient, type SectionInfo, type TypeSchema } from "./api.js";
import { clear, h } from "./dom.js";
import { buildSchemaForm, type SchemaForm } from "./form.js";

export interface WidgetTheme {
  accentColor?: string;
  fontScale?: number;
}

export interface WidgetConfig {
  apiBaseUrl: string;
  siteId: string;
  sectionId: string;
  theme?: WidgetTheme;
}

export interface WidgetHandle {
  /** The type whose form is currently rendered. */
  currentTypeId(): string;
  selectType(typeId: string): void;
  refresh(): Promise<void>;
}

export async function renderSubmissionWidget(
  container: HTMLElement,
  config: WidgetConfig,
): Promise<WidgetHandle> {
  const client = new IntakeClient(config.apiBaseUrl);
  const root = h("div", { class: "oi-widget", dataset: { openIntake: "widget" } });
  if (config.theme?.accentColor) root.style.setProperty("--oi-accent", config.theme.accentColor);
  if (config.theme?.fontScale) root.style.fontSize = `${config.theme.fontScale * 100}%`;
  clear(container);
  container.append(root);

  let info: SectionInfo;
  let currentType: TypeSchema;
  let form: SchemaForm;

  function renderError(message: string, retry: () => void): void {
    clear(root);
    root.append(
      h("div", { class: "oi-error", dataset: { widgetState: "error" } },
        h("p", {}, message),
        h("button", { type: "button", class: "oi-retry", onClick: retry }, "Try again"),
      ),
    );
  }

  function renderDone(status: string, emailGiven: boolean): void {
    clear(root);
    const notice =
      status === "accepted"
        ? "Your information is published."
        : "Thanks! Your information was received and is awaiting the site owner's review.";
    root.append(
      h("div", { class: "oi-done", dataset: { widgetState: "done", status } },
        h("p", { class: "oi-status" }, notice),
        emailGiven
          ? h("p", { class: "oi-mail-note" },
              "Check your mail for your edit link; it lets you change or remove this later.")
          : null,
        h("button", {
          type: "button", class: "oi-again",
          onClick: () => { void renderForm(currentType.type_id); },
        }, "Add another"),
      ),
    );
  }

  async function submit(email: string): Promise<void> {
    form.clearErrors();
    const note = root.querySelector<HTMLElement>("[data-widget-note]");
    if (note) { note.hidden = true; note.textContent = ""; }
    form.setDisabled(true);
    try {
      const result = await client.submit(
        config.siteId, config.sectionId, currentType.type_id, form.read(), email || undefined,
      );
      renderDone(result.status, Boolean(email));
    } catch (err) {
      form.setDisabled(false);
      if (err instanceof ApiError && err.status === 422 && err.fields) {
        form.setErrors(err.fields);
      } else if (err instanceof ApiError && err.status === 429) {
        if (note) {
          note.textContent =
            `Too many submissions right now; please wait ${err.retryAfterSeconds ?? 60}s and try again.`;
          note.hidden = false;
        }
      } else if (err instanceof ApiError) {
        if (note) { note.textContent = err.message; note.hidden = false; }
      } else {
        renderError("The submission could not be sent (network problem).",
          () => { void renderForm(currentType.type_id); });
      }
    }
  }

  async function renderForm(typeId?: string): Promise<void> {
    currentType =
      info.allowed_types.find((t) => t.type_id === typeId) ?? info.allowed_types[0];
    form = buildSchemaForm(currentType);
    clear(root);

    const emailInput = h("input", {
      type: "email", name: "email", id: "oi-submitter-email",
      dataset: { field: "email" }, placeholder: "you@example.com",
    });

    const formEl = h(
      "form",
      {
        class: "oi-form",
        dataset: { widgetState: "form" },
        onSubmit: (event: Event) => {
          event.preventDefault(); // never navigate the host page
          void submit(emailInput.value.trim());
        },
      },
      h("h3", { class: "oi-title" }, `Add your information: ${currentType.label}`),
      info.allowed_types.length > 1
        ? h(
            "select",
            {
              class: "oi-type-select",
              dataset: { role: "type-select" },
              value: currentType.type_id,
              onChange: (event: Event) => {
                void renderForm((event.target as HTMLSelectElement).value);
              },
            },
            ...info.allowed_types.map((t) =>
              h("option", { value: t.type_id, selected: t.type_id === currentType.type_id }, t.label),
            ),
          )
        : null,
      form.root,
      h("div", { class: "oi-field" },
        h("label", { htmlFor: "oi-submitter-email" },
          "Email (optional; gets you a private edit link)"),
        emailInput,
      ),
      h("p", { class: "oi-note", dataset: { widgetNote: "1" }, hidden: true }),
      h("button", { type: "submit", class: "oi-submit" }, "Submit"),
    );
    root.append(formEl);
  }

  async function load(): Promise<void> {
    try {
      info = await client.sectionInfo(config.siteId, config.sectionId);
    } catch (err) {
      renderError(
        err instanceof ApiError ? err.message : "Could not reach the submission service.",
        () => { void load(); },
      );
      return;
    }
    if (!info.open_input_enabled || info.allowed_types.length === 0) {
      clear(root);
      root.append(h("p", { dataset: { widgetState: "closed" } },
        "This section is not accepting submissions right now."));
      return;
    }
    await renderForm();
  }

  await load();

  return {
    currentTypeId: () => currentType?.type_id ?? "",
    selectType: (typeId: string) => { void renderForm(typeId); },
    refresh: load,
  };
}
