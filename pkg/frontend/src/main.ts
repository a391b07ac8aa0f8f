/**
 * Console wiring: connect bar, live graph, inspector panel with edit
 * controls. Rendering happens only on server events and replies; a lost
 * connection keeps the last state on screen behind a stale banner.
 */

import { Actions } from "./actions";
import { ConsoleGraphModel, Sample } from "./model";
import { GraphView } from "./graphView";
import { ControlClient } from "./protocol";

const client = new ControlClient();
const model = new ConsoleGraphModel();
const actions = new Actions(client);

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

let selected: { kind: "node" | "topic"; name: string } | null = null;
let watching: { topic: string; sub: number } | null = null;

function statusLine(text: string, ok: boolean): void {
  const el = $("#status".slice(1));
  el.textContent = text;
  el.className = ok ? "ok" : "err";
}

async function connect(): Promise<void> {
  const uri = ($("uri") as HTMLInputElement).value.trim() || "ws://127.0.0.1:11412";
  try {
    await client.connect(uri);
    statusLine(`connected to ${uri}`, true);
    $("banner").hidden = true;
    model.setGraph(await actions.refreshGraph());
  } catch (err) {
    statusLine(String(err), false);
  }
}

client.onStatus((connected) => {
  if (!connected) {
    model.markStale();
    $("banner").hidden = false;
  }
});

client.onEvent((event) => {
  model.apply(event);
  if (event.event === "process-exited") {
    statusLine(`process exited: ${event.node} (rc=${event.returncode})`, false);
  }
});

const view = new GraphView(
  document.getElementById("graph") as unknown as SVGSVGElement,
  model,
  (kind, name) => {
    selected = { kind, name };
    renderInspector();
  },
);

model.onChange(() => {
  view.render();
  renderInspector();
});

function renderInspector(): void {
  const panel = $("inspector");
  if (!selected) {
    panel.innerHTML = "<p>Select a node or topic.</p>";
    return;
  }
  if (selected.kind === "topic") {
    renderTopicPanel(panel, selected.name);
  } else {
    renderNodePanel(panel, selected.name);
  }
}

function renderTopicPanel(panel: HTMLElement, topic: string): void {
  const entry = model.graph.topics.find((t) => t.name === topic);
  const sample = model.lastSamples.get(topic);
  panel.innerHTML = "";
  panel.appendChild(heading(`${topic} [${entry?.schema ?? "raw"}]`));
  panel.appendChild(paragraph(`publishers: ${entry?.publishers.join(", ") || "-"}`));
  panel.appendChild(paragraph(`subscribers: ${entry?.subscribers.join(", ") || "-"}`));
  panel.appendChild(paragraph(`rate: ${model.topicRate(topic).toFixed(1)} samples/s`));

  const watchButton = button(
    watching?.topic === topic ? "stop watching" : "watch (10/s)",
    async () => {
      if (watching?.topic === topic) {
        await actions.unwatchTopic(watching.sub);
        watching = null;
      } else {
        if (watching) await actions.unwatchTopic(watching.sub);
        watching = { topic, sub: await actions.watchTopic(topic, 10) };
      }
      renderInspector();
    },
  );
  panel.appendChild(watchButton);

  if (sample) {
    panel.appendChild(heading("last sample"));
    const pre = document.createElement("pre");
    pre.textContent = renderSample(sample);
    panel.appendChild(pre);
  }
}

function renderNodePanel(panel: HTMLElement, name: string): void {
  const node = model.graph.nodes.find((n) => n.name === name);
  panel.innerHTML = "";
  panel.appendChild(heading(name));
  if (!node) {
    panel.appendChild(paragraph("(no longer in the graph)"));
    return;
  }
  for (const pub of node.publications) {
    panel.appendChild(paragraph(`pub ${pub.topic} [${pub.schema}]`));
  }
  for (const sub of node.subscriptions) {
    panel.appendChild(paragraph(`sub ${sub.topic} [${sub.schema}]`));
  }
  panel.appendChild(button("unwrap", async () => report(await actions.unwrap(name))));
  panel.appendChild(button("stop", async () => report(await actions.stopNode(name))));

  panel.appendChild(heading("add endpoint"));
  const form = document.createElement("div");
  form.innerHTML = `
    <select id="ep-set"><option>new</option><option>reuse</option></select>
    <select id="ep-dir"><option>publish</option><option>subscribe</option></select>
    <input id="ep-topic" placeholder="/topic" size="14">
    <input id="ep-schema" placeholder="Twist" size="8">
    <input id="ep-pipe" placeholder="pipeline (subs)" size="12">
  `;
  panel.appendChild(form);
  panel.appendChild(button("add", async () => {
    const value = (id: string) => ($(id) as HTMLInputElement).value.trim();
    report(await actions.addEndpoint(
      name,
      value("ep-set") as "reuse" | "new",
      value("ep-dir") as "publish" | "subscribe",
      value("ep-topic"),
      value("ep-schema") || null,
      value("ep-pipe") || undefined,
    ));
  }));
}

function renderSample(sample: Sample): string {
  const origin = sample.origin ? `  from ${sample.origin[0]}#${sample.origin[1]}` : "";
  return `seq=${sample.seq}${origin}\n` + JSON.stringify(sample.value ?? "(raw)", null, 2);
}

function report(result: { ok: boolean; detail: string; diagnostic?: string }): void {
  statusLine(result.detail, result.ok);
  if (result.diagnostic) {
    $("pipe-diagnostic").textContent = result.diagnostic;
  }
}

// --- parameter and pipeline editors ------------------------------------------

$("connect").addEventListener("click", () => void connect());
$("param-set").addEventListener("click", async () => {
  const name = ($("param-name") as HTMLInputElement).value.trim();
  const value = parseFloat(($("param-value") as HTMLInputElement).value);
  report(await actions.setParam(name, value));
});
$("param-value").addEventListener("input", () => {
  $("param-value-label").textContent = ($("param-value") as HTMLInputElement).value;
});
$("pipe-apply").addEventListener("click", async () => {
  $("pipe-diagnostic").textContent = "";
  const result = await actions.definePipeline(($("pipe-text") as HTMLTextAreaElement).value);
  report(result);
});
$("pipe-load").addEventListener("click", async () => {
  const name = ($("pipe-name") as HTMLInputElement).value.trim();
  try {
    ($("pipe-text") as HTMLTextAreaElement).value = await actions.fetchPipeline(name);
    statusLine(`loaded pipeline ${name}`, true);
  } catch (err) {
    statusLine(String(err), false);
  }
});

model.onChange(() => {
  const list = $("param-list");
  list.innerHTML = "";
  for (const [name, entry] of model.params) {
    const item = document.createElement("li");
    item.textContent = `${name} = ${entry.value} (v${entry.version})`;
    list.appendChild(item);
  }
});

function heading(text: string): HTMLElement {
  const el = document.createElement("h3");
  el.textContent = text;
  return el;
}

function paragraph(text: string): HTMLElement {
  const el = document.createElement("p");
  el.textContent = text;
  return el;
}

function button(text: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = text;
  el.addEventListener("click", onClick);
  return el;
}
