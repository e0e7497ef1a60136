/**
 * Schema-driven form fields, shared by the submission widget and the editor
 * page. Fields come exclusively from the type's published field specs; the
 * form never invents inputs.
 */

import type { ElementValues, FieldErrorDoc, TypeSchema } from "./api.js";
import { h } from "./dom.js";

export interface SchemaForm {
  root: HTMLElement;
  /** Collect entered values; empty optional fields are omitted. */
  read(): ElementValues;
  setErrors(fields: FieldErrorDoc[]): void;
  clearErrors(): void;
  setDisabled(disabled: boolean): void;
}

function inputFor(spec: TypeSchema["fields"][number], initial: unknown): HTMLElement {
  const name = spec.name;
  const common = {
    name,
    id: `oi-field-${name}`,
    dataset: { field: name },
    required: spec.required,
  };
  switch (spec.value_kind) {
    case "long_text":
      return h("textarea", { ...common, rows: 5, maxLength: spec.max_length },
        initial === undefined ? "" : String(initial));
    case "integer_rating": {
      const select = h("select", common);
      select.append(h("option", { value: "" }, "—"));
      for (const n of [1, 2, 3, 4, 5]) {
        select.append(h("option", { value: String(n) }, String(n)));
      }
      if (initial !== undefined) select.value = String(initial);
      return select;
    }
    case "date":
      return h("input", { ...common, type: "date", value: initial ?? "" });
    case "url":
      return h("input", {
        ...common, type: "url", maxLength: spec.max_length, value: initial ?? "",
        placeholder: "https://…",
      });
    case "image_list":
      return h("textarea", {
        ...common, rows: 3, placeholder: "one image reference per line",
      }, Array.isArray(initial) ? (initial as string[]).join("\n") : "");
    default: // short_text, image_ref
      return h("input", {
        ...common, type: "text", maxLength: spec.max_length, value: initial ?? "",
      });
  }
}

function readValue(spec: TypeSchema["fields"][number], node: HTMLElement): unknown {
  const raw = (node as HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement).value;
  if (raw === "" || raw === undefined) return undefined;
  if (spec.value_kind === "integer_rating") return Number(raw);
  if (spec.value_kind === "image_list") {
    const items = raw.split("\n").map((line) => line.trim()).filter(Boolean);
    return items.length ? items : undefined;
  }
  return raw;
}

export function buildSchemaForm(schema: TypeSchema, initial: ElementValues = {}): SchemaForm {
  const inputs = new Map<string, HTMLElement>();
  const root = h("div", { class: "oi-fields", dataset: { typeId: schema.type_id } });

  for (const spec of schema.fields) {
    const input = inputFor(spec, initial[spec.name]);
    inputs.set(spec.name, input);
    root.append(
      h(
        "div",
        { class: "oi-field", dataset: { fieldRow: spec.name } },
        h(
          "label",
          { class: "oi-label", htmlFor: `oi-field-${spec.name}`, dataset: { labelFor: spec.name } },
          spec.name.replace(/_/g, " "),
          spec.required ? h("span", { class: "oi-required", title: "required" }, " *") : null,
        ),
        input,
        h("p", { class: "oi-field-error", dataset: { errorFor: spec.name }, hidden: true }),
      ),
    );
  }

  return {
    root,
    read() {
      const values: ElementValues = {};
      for (const spec of schema.fields) {
        const value = readValue(spec, inputs.get(spec.name)!);
        if (value !== undefined) values[spec.name] = value;
      }
      return values;
    },
    setErrors(fields) {
      this.clearErrors();
      for (const err of fields) {
        const slot = root.querySelector<HTMLElement>(`[data-error-for="${err.field}"]`);
        if (slot) {
          slot.textContent = err.message;
          slot.hidden = false;
        }
      }
    },
    clearErrors() {
      for (const slot of root.querySelectorAll<HTMLElement>("[data-error-for]")) {
        slot.hidden = true;
        slot.textContent = "";
      }
    },
    setDisabled(disabled) {
      for (const input of inputs.values()) {
        (input as HTMLInputElement).disabled = disabled;
      }
    },
  };
}
