/**
 * The owner's moderation dashboard: a live pending queue with one-click
 * accept/decline. Rows update in place (optimistic removal, rollback on
 * failure); counters always re-read from the stats endpoint so two sessions
 * can never double-count; a stale decision (409) re-fetches the row's
 * current state. Polls every 10 s and refreshes after every action.
 */

import { ApiError, IntakeClient, type AdminElement } from "./api.js";
import { clear, h } from "./dom.js";

export interface DashboardConfig {
  apiBaseUrl: string;
  siteId: string;
  ownerKey?: string;
  pollIntervalMs?: number;
}

export interface DashboardHandle {
  refresh(): Promise<void>;
  stop(): void;
  pendingIds(): string[];
}

function preview(element: AdminElement): string {
  const parts = Object.entries(element.values)
    .slice(0, 3)
    .map(([key, value]) => `${key}: ${Array.isArray(value) ? value.join(", ") : String(value)}`);
  return parts.join(" · ").slice(0, 240);
}

export function renderModerationDashboard(
  container: HTMLElement,
  config: DashboardConfig,
): DashboardHandle {
  const client = new IntakeClient(config.apiBaseUrl, config.ownerKey);
  const root = h("div", { class: "oi-dashboard", dataset: { openIntake: "dashboard" } });
  clear(container);
  container.append(root);

  const counters = {
    pending: h("span", { dataset: { counter: "pending" } }, "0"),
    accepted: h("span", { dataset: { counter: "accepted" } }, "0"),
    declined: h("span", { dataset: { counter: "declined" } }, "0"),
  };
  const queuePanel = h("div", { class: "oi-queue", dataset: { role: "queue" } });
  const statusLine = h("p", { class: "oi-dashboard-note", dataset: { role: "note" }, hidden: true });

  let timer: ReturnType<typeof setInterval> | null = null;
  let stopped = false;

  function note(text: string): void {
    statusLine.textContent = text;
    statusLine.hidden = text === "";
  }

  function renderKeyPrompt(): void {
    clear(root);
    const keyInput = h("input", {
      type: "password", dataset: { role: "key-input" }, placeholder: "owner key",
    });
    root.append(
      h("div", { class: "oi-key-prompt", dataset: { dashboardState: "auth" } },
        h("p", {}, "Enter the site's owner key to moderate."),
        keyInput,
        h("button", {
          type: "button",
          dataset: { role: "key-submit" },
          onClick: () => {
            client.setOwnerKey(keyInput.value.trim());
            renderShell();
            void refresh();
          },
        }, "Unlock"),
      ),
    );
  }

  function renderShell(): void {
    clear(root);
    root.append(
      h("div", { class: "oi-counters", dataset: { role: "counters" } },
        h("span", { class: "oi-counter" }, "pending ", counters.pending),
        h("span", { class: "oi-counter" }, "accepted ", counters.accepted),
        h("span", { class: "oi-counter" }, "declined ", counters.declined),
      ),
      statusLine,
      queuePanel,
    );
  }

  async function refreshCounters(): Promise<void> {
    const stats = await client.stats(config.siteId);
    counters.pending.textContent = String(stats.pending);
    counters.accepted.textContent = String(stats.accepted);
    counters.declined.textContent = String(stats.declined);
  }

  function removeRow(elementId: string): HTMLElement | null {
    const row = queuePanel.querySelector<HTMLElement>(`[data-element-id="${elementId}"]`);
    if (row) row.remove();
    if (!queuePanel.querySelector("[data-element-id]")) renderEmptyState();
    return row;
  }

  function renderEmptyState(): void {
    if (!queuePanel.querySelector("[data-role='empty']")) {
      queuePanel.append(
        h("p", { class: "oi-empty", dataset: { role: "empty" } }, "Nothing pending."),
      );
    }
  }

  function restoreRow(row: HTMLElement): void {
    queuePanel.querySelector("[data-role='empty']")?.remove();
    queuePanel.append(row);
  }

  async function act(element: AdminElement, decision: "accept" | "decline"): Promise<void> {
    note("");
    const row = removeRow(element.element_id); // optimistic, in place, no reload
    try {
      await client.decide(element.element_id, decision);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else moved it; show the row's real current state
        try {
          const current = await client.getElement(element.element_id);
          if (current.status === "pending" && row) restoreRow(row);
          note(`Element ${element.element_id} is now ${current.status}.`);
        } catch {
          note(`Element ${element.element_id} changed; refresh to see its state.`);
        }
      } else if (err instanceof ApiError && err.status === 401) {
        renderKeyPrompt();
        return;
      } else {
        if (row) restoreRow(row);
        note(err instanceof Error ? err.message : "The decision could not be saved.");
      }
    }
    await refresh(); // refresh-on-action: counters and queue from the server
  }

  function issueLinkControls(element: AdminElement): HTMLElement {
    const email = h("input", {
      type: "email", placeholder: "submitter email",
      dataset: { role: "link-email", forElement: element.element_id },
      hidden: true,
    });
    const result = h("span", { class: "oi-link-result", dataset: { role: "link-result" } });
    return h("span", { class: "oi-issue-link" },
      h("button", {
        type: "button",
        dataset: { action: "issue-link", forElement: element.element_id },
        onClick: async () => {
          if (email.hidden) {
            email.hidden = false;
            return;
          }
          try {
            const issued = await client.issueLink(element.element_id, email.value.trim());
            result.textContent = issued.edit_url;
            email.hidden = true;
          } catch (err) {
            result.textContent = err instanceof Error ? err.message : "failed";
          }
        },
      }, "issue editor-link"),
      email,
      result,
    );
  }

  function renderRow(element: AdminElement): HTMLElement {
    return h("div", { class: "oi-row", dataset: { elementId: element.element_id } },
      h("div", { class: "oi-row-head" },
        h("strong", {}, element.type_id),
        h("span", { class: "oi-row-meta" },
          ` in ${element.section_id} · ${element.created_at} · by ${element.submitter_class}`),
      ),
      h("div", { class: "oi-row-preview", dataset: { role: "preview" } }, preview(element)),
      h("div", { class: "oi-row-actions" },
        h("button", {
          type: "button",
          class: "oi-accept",
          dataset: { action: "accept", forElement: element.element_id },
          onClick: () => { void act(element, "accept"); },
        }, "accept"),
        h("button", {
          type: "button",
          class: "oi-decline",
          dataset: { action: "decline", forElement: element.element_id },
          onClick: () => { void act(element, "decline"); },
        }, "decline"),
        issueLinkControls(element),
      ),
    );
  }

  async function refresh(): Promise<void> {
    if (stopped) return;
    try {
      const [queue] = await Promise.all([client.queue(config.siteId), refreshCounters()]);
      // the queue panel must never show anything that is not pending
      const pending = queue.items.filter((e) => e.status === "pending");
      if (pending.length !== queue.items.length) {
        throw new Error("queue response contained a non-pending element");
      }
      clear(queuePanel);
      if (pending.length === 0) {
        renderEmptyState();
      } else {
        for (const element of pending) queuePanel.append(renderRow(element));
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        renderKeyPrompt();
        return;
      }
      note(err instanceof Error ? err.message : "Refresh failed.");
    }
  }

  if (config.ownerKey) {
    renderShell();
    void refresh();
  } else {
    renderKeyPrompt();
  }
  timer = setInterval(() => { void refresh(); }, config.pollIntervalMs ?? 10_000);

  return {
    refresh,
    stop() {
      stopped = true;
      if (timer) clearInterval(timer);
    },
    pendingIds() {
      return Array.from(queuePanel.querySelectorAll<HTMLElement>("[data-element-id]")).map(
        (row) => row.dataset.elementId!,
      );
    },
  };
}
