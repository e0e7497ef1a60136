/** Shared test scaffolding: a scripted fetch fake and a live-server harness. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { createServer } from "node:net";

export type RouteHandler = (body: unknown, url: URL) => { status: number; body: unknown };

/** Install a fetch fake keyed by "METHOD /path"; returns the call log. */
export function fakeFetch(routes: Record<string, RouteHandler>) {
  const calls: { method: string; path: string; body: unknown }[] = [];
  const impl = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = new URL(String(input));
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path: url.pathname, body });
    const handler = routes[`${method} ${url.pathname}`];
    if (!handler) {
      return new Response(JSON.stringify({ code: "not_found", message: "no route" }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    const result = handler(body, url);
    return new Response(JSON.stringify(result.body), {
      status: result.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  globalThis.fetch = impl as typeof fetch;
  return calls;
}

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

export interface LiveServer {
  base: string;
  ownerKey: string;
  siteId: string;
  stop(): void;
}

/** Boot the real intake service in a child process and init one open site. */
export async function startLiveServer(): Promise<LiveServer> {
  const port = await freePort();
  const dir = mkdtempSync(join(tmpdir(), "oi-frontend-"));
  const configPath = join(dir, "open-intake.toml");
  const ownerKey = "frontend-e2e-key";
  writeFileSync(
    configPath,
    [
      `data_dir = "${join(dir, "data")}"`,
      `bind = "127.0.0.1:${port}"`,
      `base_url = "http://127.0.0.1:${port}"`,
      "[owner_keys]",
      `e2e = "${ownerKey}"`,
      "[rate_limit]",
      "enabled = false",
      "[notifier]",
      'adapter = "outbox"',
      `outbox_path = "${join(dir, "outbox.jsonl")}"`,
      "",
    ].join("\n"),
  );

  const cli = (...args: string[]) => {
    const result = spawnSync(
      "python3",
      ["-m", "open_intake.cli", "--config", configPath, ...args],
      { encoding: "utf-8" },
    );
    if (result.status !== 0) {
      throw new Error(`cli ${args.join(" ")} failed: ${result.stderr}`);
    }
    return result.stdout;
  };

  cli("init", "--site", "e2e", "--owner-email", "owner@example.com", "--owner-key", ownerKey);
  cli("section", "add", "e2e", "main", "--types",
    "testimonial,billboard,qa,news,client_info,text,video,link,image_gallery");

  const child: ChildProcess = spawn(
    "python3",
    ["-m", "open_intake.cli", "--config", configPath, "serve"],
    { stdio: "ignore" },
  );

  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${base}/healthz`);
      if (response.ok) break;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error("intake service did not start");
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }

  return {
    base,
    ownerKey,
    siteId: "e2e",
    stop() {
      child.kill("SIGTERM");
    },
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

/** Wait until `predicate` holds (poll), failing after `ms`. */
export async function until(predicate: () => boolean, ms = 5_000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error("condition not reached in time");
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}
