/**
 * Typed client for the open-intake HTTP API.
 *
 * Errors surface as ApiError carrying the service's {code, message, fields?}
 * body, so UI code can branch on status (401 key prompt, 409 refresh,
 * 422 inline field errors, 429 cool-down) without string matching.
 */

export interface FieldSpec {
  name: string;
  value_kind: string;
  required: boolean;
  max_length: number;
}

export interface TypeSchema {
  type_id: string;
  kind: string;
  label: string;
  fields: FieldSpec[];
}

export interface SectionInfo {
  section_id: string;
  site_id: string;
  parent_id: string | null;
  name: string;
  description: string;
  policy: string;
  open_input_enabled: boolean;
  allowed_types: TypeSchema[];
}

export type ElementValues = Record<string, unknown>;

export interface PublicElement {
  element_id: string;
  section_id: string;
  type_id: string;
  values: ElementValues;
  status: string;
  created_at: string;
}

export interface AdminElement extends PublicElement {
  site_id: string;
  submitter_class: string;
  submitter_subject: string | null;
  submitter_email: string | null;
  decided_at: string | null;
  version: number;
}

export interface SubmitResult {
  element_id: string;
  status: string;
  editor_link_url: string | null;
}

export interface PublicPage {
  items: PublicElement[];
  page: number;
  page_size: number;
  total: number;
}

export interface Stats {
  total_submitted: number;
  accepted: number;
  declined: number;
  pending: number;
  acceptance_rate: number;
  per_type: Record<string, { submitted: number; accepted: number }>;
}

export interface EditView {
  element: PublicElement;
  actions: string[];
  schema: TypeSchema;
}

export interface FieldErrorDoc {
  field: string;
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly fields?: FieldErrorDoc[],
    readonly retryAfterSeconds?: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let code = `http_${response.status}`;
  let message = response.statusText;
  let fields: FieldErrorDoc[] | undefined;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
      fields = body.fields;
    }
  } catch {
    /* non-JSON error body; keep the status text */
  }
  const retryAfter = response.headers.get("Retry-After");
  return new ApiError(
    response.status,
    code,
    message,
    fields,
    retryAfter ? Number(retryAfter) : undefined,
  );
}

export class IntakeClient {
  constructor(
    readonly baseUrl: string,
    private ownerKey?: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  setOwnerKey(key: string): void {
    this.ownerKey = key;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.ownerKey) headers["X-Owner-Key"] = this.ownerKey;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as T;
  }

  // public
  sectionInfo(siteId: string, sectionId: string): Promise<SectionInfo> {
    return this.request("GET", `/sites/${siteId}/sections/${sectionId}`);
  }

  submit(
    siteId: string,
    sectionId: string,
    typeId: string,
    values: ElementValues,
    email?: string,
  ): Promise<SubmitResult> {
    return this.request("POST", `/sites/${siteId}/sections/${sectionId}/elements`, {
      type_id: typeId,
      values,
      email: email || null,
    });
  }

  listPublic(
    siteId: string,
    sectionId: string,
    page = 1,
    pageSize = 20,
    sort: "newest_first" | "oldest_first" = "newest_first",
  ): Promise<PublicPage> {
    const query = `?page=${page}&page_size=${pageSize}&sort=${sort}`;
    return this.request("GET", `/sites/${siteId}/sections/${sectionId}/elements${query}`);
  }

  // admin
  queue(siteId: string): Promise<{ items: AdminElement[] }> {
    return this.request("GET", `/admin/sites/${siteId}/queue`);
  }

  stats(siteId: string): Promise<Stats> {
    return this.request("GET", `/admin/sites/${siteId}/stats`);
  }

  getElement(elementId: string): Promise<AdminElement> {
    return this.request("GET", `/admin/elements/${elementId}`);
  }

  decide(elementId: string, decision: "accept" | "decline"): Promise<AdminElement> {
    return this.request("POST", `/admin/elements/${elementId}/decision`, { decision });
  }

  issueLink(
    elementId: string,
    email: string,
  ): Promise<{ element_id: string; email: string; edit_url: string }> {
    return this.request("POST", `/admin/elements/${elementId}/editor-link`, { email });
  }

  // editor link surface
  editView(token: string): Promise<EditView> {
    return this.request("GET", `/edit/${token}`);
  }

  saveEdit(token: string, values: ElementValues): Promise<PublicElement> {
    return this.request("PUT", `/edit/${token}`, { values });
  }

  deleteViaLink(token: string): Promise<{ deleted: boolean }> {
    return this.request("DELETE", `/edit/${token}`);
  }
}
