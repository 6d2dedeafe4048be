// End-to-end against the real Python service: a scripted browser session
// (controller + DOM clicks) must leave the exact same server-side snapshot
// as the same transcript submitted through the raw API.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { request as httpRequest } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ElicitClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { render } from "../src/heatmap.js";
import type { ElicitationView } from "../src/model.js";

const run = promisify(execFile);
const PORT = 8741;
const BASE = `http://127.0.0.1:${PORT}`;

// Plain node HTTP transport: the DOM test environment's fetch is not
// involved, so the comparison exercises only the service contract.
function nodeFetch(input: string, init: RequestInit = {}): Promise<Response> {
  return new Promise((resolve, reject) => {
    const req = httpRequest(
      input,
      {
        method: init.method ?? "GET",
        headers: (init.headers as Record<string, string>) ?? {},
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (c: Buffer) => chunks.push(c));
        res.on("end", () => {
          const text = Buffer.concat(chunks).toString("utf8");
          resolve({
            ok: (res.statusCode ?? 0) >= 200 && (res.statusCode ?? 0) < 300,
            status: res.statusCode ?? 0,
            statusText: res.statusMessage ?? "",
            json: async () => JSON.parse(text) as unknown,
          } as unknown as Response);
        });
      },
    );
    req.on("error", reject);
    if (init.body !== undefined) req.write(init.body as string);
    req.end();
  });
}

const client = new ElicitClient(BASE, nodeFetch);

// Relevance rule keyed only on the feature name, so the browser-driven and
// raw sessions (same seed, hence same queries) produce identical transcripts.
function judge(feature: string): 0 | 1 {
  return parseInt(feature.slice(2), 10) % 3 === 0 ? 1 : 0;
}

let server: ChildProcess | undefined;
let serverLog = "";

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "elicit-ui-"));
  const data = join(dir, "data.json");
  const aux = join(dir, "aux.jsonl");
  const desc = join(dir, "desc.tsv");
  await run("elicit", [
    "synth", "--features", "40", "--docs", "40", "--relevant", "4",
    "--seed", "1", "--out", data, "--aux-out", aux, "--aux-docs", "150",
  ]);
  await run("elicit", [
    "descriptors", "--aux", aux, "--data", data,
    "--clusters", "6", "--seed", "1", "--out", desc,
  ]);
  server = spawn("elicit", [
    "serve", "--dataset", data, "--descriptors", desc,
    "--split-seed", "0", "--port", String(PORT),
  ]);
  server.stderr?.on("data", (c: Buffer) => (serverLog += c.toString()));
  server.stdout?.on("data", (c: Buffer) => (serverLog += c.toString()));

  const deadline = Date.now() + 120_000;
  for (;;) {
    try {
      await client.health();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error(`service never came up:\n${serverLog}`);
      await new Promise((r) => setTimeout(r, 500));
    }
  }
});

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("browser session against the live service", () => {
  it("replays identically to a raw API session", { timeout: 300_000 }, async () => {
    // --- scripted browser session ---
    await client.createSession({ condition: "c3", seed: 7, id: "ui" });
    const container = document.createElement("div");
    document.body.appendChild(container);

    let submitDone: Promise<void> = Promise.resolve();
    const controller: SessionController = new SessionController(client, "ui", (view: ElicitationView) => {
      render(container, view, {
        onToggle: (feature, value) => controller.setToggle(feature, value),
        onSubmit: () => {
          submitDone = controller.submit();
        },
      });
    });
    await controller.initialize();

    for (let round = 0; round < 3; round++) {
      await controller.requestQuery();
      const features = controller.view().columns.map((c) => c.feature);
      expect(features).toHaveLength(10); // default batch size
      if (round === 0) {
        const unset = container.querySelectorAll('.toggle__btn[aria-pressed="true"]');
        expect(unset).toHaveLength(0);
      }
      for (const feature of features) {
        // each click re-renders, so look the button up in the fresh DOM
        const selector = `.toggle[data-feature="${feature}"] .toggle__btn--${judge(feature) === 1 ? "yes" : "no"}`;
        const button = container.querySelector<HTMLButtonElement>(selector);
        expect(button, selector).not.toBeNull();
        button!.click();
      }
      const submit = container.querySelector<HTMLButtonElement>(".elicit__submit");
      expect(submit).not.toBeNull();
      expect(submit!.disabled).toBe(false);
      submit!.click();
      await submitDone;
      expect(controller.view().error).toBeNull();
    }
    const uiView = controller.view();
    expect(uiView.iteration).toBe(3);
    expect(uiView.mseHistory).toHaveLength(4);
    expect(container.querySelector<SVGSVGElement>(".sparkline")!.dataset.points).toBe("4");

    // --- the same transcript through the raw API ---
    await client.createSession({ condition: "c3", seed: 7, id: "raw" });
    for (let round = 0; round < 3; round++) {
      const view = await client.postQuery("raw");
      const features = view.pending_query!.features;
      const answers: Record<string, number> = {};
      for (const f of features) answers[f] = judge(f);
      await client.postFeedback("raw", answers);
    }

    const uiSnap = await client.getSnapshot("ui");
    const rawSnap = await client.getSnapshot("raw");
    expect(uiSnap.transcript).toEqual(rawSnap.transcript);
    expect(uiSnap.mse_history).toEqual(rawSnap.mse_history); // float-exact
    const { id: uiId, ...uiRest } = uiSnap;
    const { id: rawId, ...rawRest } = rawSnap;
    expect(uiId).toBe("ui");
    expect(rawId).toBe("raw");
    expect(uiRest).toEqual(rawRest); // identical up to the session name
  });

  it("rejects bad browser feedback without losing state", { timeout: 60_000 }, async () => {
    await client.createSession({ condition: "c3", seed: 11, id: "err" });
    const controller = new SessionController(client, "err");
    await controller.initialize();
    await controller.requestQuery();
    const features = controller.view().columns.map((c) => c.feature);

    // answer only part of the batch behind the controller's back
    const partial: Record<string, number> = { [features[0]!]: 1 };
    await expect(client.postFeedback("err", partial)).rejects.toMatchObject({
      status: 422,
      detail: expect.stringContaining("missing response"),
    });

    // the pending query survives the rejection; the full submission lands
    for (const f of features) controller.setToggle(f, judge(f));
    await controller.submit();
    expect(controller.view().error).toBeNull();
    expect(controller.view().mseHistory).toHaveLength(2);
  });
});
