import { ConnectionError, GatewayClient, GatewayError, corporaFrom } from "./api.js";
import { Latest } from "./latest.js";
import { metricsRows } from "./metricsTable.js";
import { passagesFromTrace } from "./passages.js";
import {
  renderAnswers,
  renderConnectionError,
  renderError,
  renderMetrics,
  renderWaterfall,
} from "./render.js";
import { buildWaterfall } from "./waterfall.js";

const METRICS_POLL_MS = 2000;

// Gateway URL is configurable at load: ?gateway=http://host:port, default
// the origin serving the console (the gateway itself under /ui).
const params = new URLSearchParams(window.location.search);
const client = new GatewayClient(
  params.get("gateway") ?? window.location.origin,
);

const el = (id: string) => document.getElementById(id) as HTMLElement;
const form = el("ask-form") as unknown as HTMLFormElement;
const corpusSelect = el("corpus") as unknown as HTMLSelectElement;
const queries = new Latest();

async function loadCorpora(): Promise<void> {
  try {
    const corpora = corporaFrom(await client.graph());
    corpusSelect.innerHTML = corpora
      .map((c) => `<option value="${c}">${c}</option>`)
      .join("");
    el("banner").innerHTML = "";
  } catch {
    el("banner").innerHTML = renderConnectionError();
  }
}

async function submitQuery(): Promise<void> {
  const token = queries.next();
  const question = (el("question") as unknown as HTMLInputElement).value;
  const k = Number((el("k") as unknown as HTMLInputElement).value);
  const threshold = Number(
    (el("threshold") as unknown as HTMLInputElement).value,
  );
  el("banner").innerHTML = "";
  el("answers").innerHTML = '<p class="empty">asking…</p>';
  try {
    const resp = await client.ask(question, corpusSelect.value, k, threshold);
    if (!queries.isCurrent(token)) return;
    const trace = resp.trace ?? [];
    el("answers").innerHTML = renderAnswers(
      resp.output.answers,
      passagesFromTrace(trace),
    );
    el("trace").innerHTML = renderWaterfall(buildWaterfall(trace));
  } catch (err) {
    if (!queries.isCurrent(token)) return;
    el("answers").innerHTML = "";
    if (err instanceof GatewayError) {
      el("banner").innerHTML = renderError(err.envelope);
    } else if (err instanceof ConnectionError) {
      el("banner").innerHTML = renderConnectionError();
    } else {
      throw err;
    }
  }
}

async function pollMetrics(): Promise<void> {
  try {
    const report = await client.metrics();
    el("metrics").innerHTML = renderMetrics(metricsRows(report), false);
  } catch {
    // keep the last table but flag it as stale
    const table = el("metrics").querySelector("table");
    el("metrics").innerHTML = renderMetrics([], true);
    if (table) el("metrics").appendChild(table);
  }
}

form.addEventListener("submit", (ev) => {
  ev.preventDefault();
  void submitQuery();
});

void loadCorpora();
void pollMetrics();
setInterval(() => void pollMetrics(), METRICS_POLL_MS);
