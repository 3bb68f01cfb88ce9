import { Api } from "./api.js";
import { DEFAULT_GEOMETRY, markers, polylinePoints } from "./chart.js";
import { ProgressController } from "./progress.js";
import { QueueController, describe, loadTaxonomy } from "./queue.js";
import type { TaskView } from "./types.js";

const api = new Api("");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function renderTaskList(queue: QueueController): void {
  const list = byId("task-list");
  list.replaceChildren();
  queue.tasks.forEach((task, i) => {
    const item = el("li", { class: i === queue.openIndex ? "task open" : "task" });
    const score = task.uncertainty === null ? "n/a" : task.uncertainty.toFixed(3);
    item.append(
      el("span", { class: "task-id" }, task.doc_id),
      el("span", { class: "task-score" }, `uncertainty ${score}`),
    );
    item.addEventListener("click", () => {
      queue.open(i);
      renderQueue(queue);
    });
    list.append(item);
  });
  byId("queue-mode").textContent =
    queue.selection === "random_fallback"
      ? "No trained model yet: queue is in random order."
      : queue.selection === "uncertainty"
        ? "Queue ordered by model uncertainty."
        : "";
}

function renderChecklist(
  queue: QueueController,
  kind: "aspects" | "sentiment",
  labels: readonly string[],
  task: TaskView,
): HTMLElement {
  const wrap = el("div", { class: "checklist" });
  labels.forEach((label, i) => {
    const id = `${kind}-${i}`;
    const box = el("input", { type: "checkbox", id }) as HTMLInputElement;
    box.checked = queue.selected[kind].has(label);
    box.addEventListener("change", () => queue.toggle(kind, label));
    const item = el("label", { for: id, class: "check-item" });
    const probs =
      kind === "aspects" ? task.predictions?.aspect : task.predictions?.sentiment;
    const hint = probs ? ` (${(probs[i] * 100).toFixed(0)}%)` : "";
    item.append(box, el("span", {}, `${label}${hint}`));
    wrap.append(item);
  });
  return wrap;
}

function renderOpenTask(queue: QueueController): void {
  const panel = byId("task-panel");
  panel.replaceChildren();
  const task = queue.openTask;
  if (!task) {
    panel.append(
      el("p", { class: "empty" },
        queue.exhausted ? "Nothing left to label." : "No task selected."),
    );
    return;
  }
  panel.append(el("h3", {}, task.doc_id));
  panel.append(el("blockquote", { class: "review-text" }, task.text));
  panel.append(el("h4", {}, "Aspects"));
  panel.append(renderChecklist(queue, "aspects", queue.taxonomy.aspects, task));
  panel.append(el("h4", {}, "Sentiment"));
  panel.append(renderChecklist(queue, "sentiment", queue.taxonomy.sentiment, task));
  const submit = el("button", { class: "primary" }, "Submit labels");
  submit.addEventListener("click", async () => {
    await queue.submit(() =>
      window.confirm("No labels selected. Submit an empty label set?"));
    renderQueue(queue);
  });
  panel.append(submit);
}

function renderQueue(queue: QueueController): void {
  renderTaskList(queue);
  renderOpenTask(queue);
  byId("queue-notice").textContent = queue.notice ?? "";
  byId("queue-error").textContent = queue.error ?? "";
}

function renderProgress(progress: ProgressController): void {
  const counts = byId("pool-counts");
  if (progress.metrics) {
    const c = progress.metrics.counts;
    counts.textContent =
      `labeled ${c.labeled} · unlabeled ${c.unlabeled} · ` +
      `pending ${c.pending} · validation ${c.validation}`;
    byId("latest-scores").textContent =
      `aspect F1 ${progress.metrics.aspect.micro_f1.toFixed(3)} · ` +
      `sentiment F1 ${progress.metrics.sentiment.micro_f1.toFixed(3)}`;
  } else {
    counts.textContent = "No completed training round yet.";
    byId("latest-scores").textContent = "";
  }

  const button = byId("retrain") as HTMLButtonElement;
  button.disabled = progress.retrainDisabled;
  byId("train-state").textContent =
    progress.training.status === "failed"
      ? `training failed: ${progress.training.detail}`
      : `training: ${progress.training.status}`;
  byId("progress-error").textContent = progress.error ?? "";

  const svg = byId("curve-chart");
  svg.replaceChildren();
  const curve = progress.curve;
  if (!curve) {
    byId("curve-empty").textContent = "The learning curve appears after the first retrain.";
    return;
  }
  byId("curve-empty").textContent = "";
  const geo = DEFAULT_GEOMETRY;
  const colors: Record<string, string> = { aspect: "#2563eb", sentiment: "#dc2626" };
  for (const task of ["aspect", "sentiment"] as const) {
    const pts = curve.points[task];
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", polylinePoints(pts, geo));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", colors[task]);
    line.setAttribute("stroke-width", "2");
    svg.append(line);
    for (const m of markers(pts, geo)) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", m.cx.toFixed(1));
      dot.setAttribute("cy", m.cy.toFixed(1));
      dot.setAttribute("r", "3.5");
      dot.setAttribute("fill", colors[task]);
      const tip = document.createElementNS("http://www.w3.org/2000/svg", "title");
      tip.textContent = `${task}: n=${m.labeledCount} micro-F1=${m.microF1}`;
      dot.append(tip);
      svg.append(dot);
    }
  }
}

async function start(): Promise<void> {
  let queue: QueueController;
  try {
    const taxonomy = await loadTaxonomy(api);
    queue = new QueueController(api, taxonomy);
  } catch (err) {
    byId("fatal").textContent =
      `Cannot load the label taxonomy from the service: ${describe(err)}`;
    return;
  }
  const progress = new ProgressController(api);

  byId("reload-queue").addEventListener("click", async () => {
    await queue.load();
    renderQueue(queue);
  });
  byId("retrain").addEventListener("click", async () => {
    await progress.retrain();
    renderProgress(progress);
    await progress.pollUntilSettled();
    renderProgress(progress);
  });
  byId("refresh-progress").addEventListener("click", async () => {
    await progress.refresh();
    renderProgress(progress);
  });

  await queue.load();
  renderQueue(queue);
  await progress.refresh();
  renderProgress(progress);
}

start();
