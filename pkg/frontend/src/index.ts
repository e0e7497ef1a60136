/**
 * Entry point. Exposes the three surfaces programmatically and auto-mounts
 * from data attributes so a host page can adopt open input by pasting one
 * script tag:
 *
 *   <div data-open-intake-widget
 *        data-api="https://intake.example.com"
 *        data-site="demo" data-section="testimonials"></div>
 *   <script src="open-intake.js"></script>
 */

export { ApiError, IntakeClient } from "./api.js";
export type { AdminElement, PublicElement, SectionInfo, TypeSchema } from "./api.js";
export { renderSubmissionWidget } from "./widget.js";
export type { WidgetConfig, WidgetHandle } from "./widget.js";
export { renderModerationDashboard } from "./dashboard.js";
export type { DashboardConfig, DashboardHandle } from "./dashboard.js";
export { renderEditorPage } from "./editor.js";
export type { EditorConfig, EditorHandle } from "./editor.js";

import { renderModerationDashboard } from "./dashboard.js";
import { renderEditorPage } from "./editor.js";
import { renderSubmissionWidget } from "./widget.js";

function autoMount(): void {
  for (const node of document.querySelectorAll<HTMLElement>("[data-open-intake-widget]")) {
    void renderSubmissionWidget(node, {
      apiBaseUrl: node.dataset.api ?? "",
      siteId: node.dataset.site ?? "",
      sectionId: node.dataset.section ?? "",
    });
  }
  for (const node of document.querySelectorAll<HTMLElement>("[data-open-intake-dashboard]")) {
    renderModerationDashboard(node, {
      apiBaseUrl: node.dataset.api ?? "",
      siteId: node.dataset.site ?? "",
      ownerKey: node.dataset.ownerKey,
    });
  }
  for (const node of document.querySelectorAll<HTMLElement>("[data-open-intake-editor]")) {
    // default: token from the path, /edit/<token>
    const token =
      node.dataset.token ?? window.location.pathname.split("/").filter(Boolean).pop() ?? "";
    void renderEditorPage(node, { apiBaseUrl: node.dataset.api ?? "", token });
  }
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", autoMount);
  } else {
    autoMount();
  }
}
