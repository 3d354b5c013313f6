/** Page wiring: sliders in, requests out, pixels on screen.
 *
 * All service traffic funnels through one debounced, ticketed path so
 * a drag emits a single request and an out-of-date response can never
 * overwrite a newer frame.
 */

import { ApiError, Client, decodeBytes, decodeField } from "./api.js";
import type { ExploreResponse, LatentBounds } from "./api.js";
import { debounce } from "./debounce.js";
import { drawInto, fieldToRgba, fieldValueAt, maskToRgba } from "./heatmap.js";
import { LatestWins } from "./requests.js";
import {
  MU1_RANGE,
  MU2_RANGE,
  clampState,
  decodeFragment,
  defaultState,
  encodeFragment,
} from "./state.js";
import type { SliderState } from "./state.js";

const DEBOUNCE_MS = 150;

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8642";
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function messageFor(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

interface Ui {
  banner: HTMLElement;
  mask: HTMLCanvasElement;
  field: HTMLCanvasElement;
  readout: HTMLElement;
  scale: HTMLElement;
  modes: HTMLElement;
  alphaBox: HTMLElement;
  mu1: HTMLInputElement;
  mu2: HTMLInputElement;
  mu1Label: HTMLElement;
  mu2Label: HTMLElement;
  seed: HTMLInputElement;
  sample: HTMLButtonElement;
}

function collectUi(): Ui {
  return {
    banner: byId("banner"),
    mask: byId<HTMLCanvasElement>("mask-canvas"),
    field: byId<HTMLCanvasElement>("field-canvas"),
    readout: byId("readout"),
    scale: byId("scale"),
    modes: byId("modes"),
    alphaBox: byId("alpha-sliders"),
    mu1: byId<HTMLInputElement>("mu1"),
    mu2: byId<HTMLInputElement>("mu2"),
    mu1Label: byId("mu1-label"),
    mu2Label: byId("mu2-label"),
    seed: byId<HTMLInputElement>("seed"),
    sample: byId<HTMLButtonElement>("sample"),
  };
}

function setBanner(ui: Ui, text: string | null): void {
  ui.banner.textContent = text ?? "";
  ui.banner.classList.toggle("visible", text !== null);
}

function setPending(ui: Ui, pending: boolean): void {
  ui.field.classList.toggle("pending", pending);
  ui.mask.classList.toggle("pending", pending);
}

function render(ui: Ui, res: ExploreResponse): void {
  const side = Math.round(Math.sqrt(decodeBytes(res.image).length));
  const mask = decodeBytes(res.image);
  drawInto(ui.mask, maskToRgba(mask, side, side), side, side);

  const [rows, cols] = res.field_shape;
  const field = decodeField(res.field);
  drawInto(ui.field, fieldToRgba(field, cols, rows, res.field_min, res.field_max), cols, rows);
  ui.scale.textContent = `${res.field_min.toFixed(1)} – ${res.field_max.toFixed(1)} MPa`;
  ui.modes.textContent = res.modes_summary
    .map((m, i) => `mode ${i + 1} rms ${m.field_rms.toFixed(1)}`)
    .join("  ·  ");
}

function main(): void {
  const ui = collectUi();
  const client = new Client(apiBase());
  const tickets = new LatestWins();
  let lastField: { data: Float32Array; rows: number; cols: number } | null = null;

  const boot = async () => {
    const bounds = await client.latentBounds();
    let state = defaultState(bounds);
    const fromUrl = decodeFragment(window.location.hash, bounds.lo.length);
    if (fromUrl) state = clampState(fromUrl, bounds);

    const alphaInputs: HTMLInputElement[] = [];

    const requestFrame = async () => {
      const ticket = tickets.next();
      setPending(ui, true);
      try {
        const res = await client.explore({
          alpha: state.alpha,
          mu1: state.mu1,
          mu2: state.mu2,
        });
        if (!tickets.isCurrent(ticket)) return;
        const [rows, cols] = res.field_shape;
        lastField = { data: decodeField(res.field), rows, cols };
        render(ui, res);
        setBanner(ui, null);
      } catch (err) {
        if (!tickets.isCurrent(ticket)) return;
        setBanner(ui, messageFor(err));
      } finally {
        if (tickets.isCurrent(ticket)) setPending(ui, false);
      }
    };
    const scheduleFrame = debounce(requestFrame, DEBOUNCE_MS);

    const syncControls = () => {
      state.alpha.forEach((v, i) => {
        const input = alphaInputs[i];
        if (input) input.value = String(v);
      });
      ui.mu1.value = String(state.mu1);
      ui.mu2.value = String(state.mu2);
      ui.mu1Label.textContent = `μ1 = ${state.mu1.toFixed(0)} MPa`;
      ui.mu2Label.textContent = `μ2 = ${state.mu2.toFixed(0)} MPa`;
    };

    const onStateEdit = () => {
      state = clampState(state, bounds);
      syncControls();
      window.history.replaceState(null, "", encodeFragment(state));
      scheduleFrame();
    };

    bounds.lo.forEach((lo, i) => {
      const hi = bounds.hi[i] ?? lo;
      const row = document.createElement("label");
      row.className = "slider-row";
      row.textContent = `α${i + 1}`;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(lo);
      input.max = String(hi);
      input.step = String((hi - lo) / 400 || 1);
      input.addEventListener("input", () => {
        state.alpha[i] = Number(input.value);
        onStateEdit();
      });
      row.appendChild(input);
      alphaInputs.push(input);
      ui.alphaBox.appendChild(row);
    });

    for (const [input, range] of [
      [ui.mu1, MU1_RANGE],
      [ui.mu2, MU2_RANGE],
    ] as const) {
      input.min = String(range.min);
      input.max = String(range.max);
      input.step = "1";
    }
    ui.mu1.addEventListener("input", () => {
      state.mu1 = Number(ui.mu1.value);
      onStateEdit();
    });
    ui.mu2.addEventListener("input", () => {
      state.mu2 = Number(ui.mu2.value);
      onStateEdit();
    });

    ui.sample.addEventListener("click", async () => {
      try {
        const seed = Math.trunc(Number(ui.seed.value) || 0);
        const res = await client.generate(1, seed);
        const alpha = res.alphas[0];
        if (!alpha) throw new Error("service returned no sample");
        state = clampState({ ...state, alpha }, bounds);
        syncControls();
        window.history.replaceState(null, "", encodeFragment(state));
        scheduleFrame.cancel();
        await requestFrame();
      } catch (err) {
        setBanner(ui, messageFor(err));
      }
    });

    ui.field.addEventListener("mousemove", (ev) => {
      if (!lastField) return;
      const rect = ui.field.getBoundingClientRect();
      const value = fieldValueAt(
        lastField.data,
        lastField.rows,
        lastField.cols,
        ev.clientX - rect.left,
        ev.clientY - rect.top,
        rect.width,
        rect.height,
      );
      ui.readout.textContent = value === null ? "" : `σ = ${value.toFixed(2)} MPa`;
    });
    ui.field.addEventListener("mouseleave", () => {
      ui.readout.textContent = "";
    });

    syncControls();
    window.history.replaceState(null, "", encodeFragment(state));
    await requestFrame();
  };

  boot().catch((err) => setBanner(ui, `service unreachable: ${messageFor(err)}`));
}

main();
