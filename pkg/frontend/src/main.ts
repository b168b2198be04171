/** DOM wiring for the review UI.
 *
 * All state transitions live in the pure modules (state, viewsync,
 * validate, offline); this file only reads events and paints. The tally
 * panel always paints server numbers, optimistic ones bridge the brief
 * gap until the post-submit refetch answers.
 */

import { ApiError, OfflineError, ReviewApi, ValidationError } from "./api.js";
import { keyAction } from "./keyboard.js";
import { RetryQueue } from "./offline.js";
import {
  BrowseState,
  applyOptimistic,
  createBrowseState,
  currentImage,
  displayTally,
  draftKey,
  getDraft,
  isAssessed,
  jumpTo,
  markSubmitted,
  reconcileTally,
  setDraft,
  step,
  tallyRows,
  unassessedIndexes,
} from "./state.js";
import { RATINGS } from "./types.js";
import type { AssessmentPayload, RunId } from "./types.js";
import { validateDraft } from "./validate.js";
import type { FormDraft } from "./validate.js";
import { ViewTransform, cssTransform, identity, panBy, zoomAt } from "./viewsync.js";

const api = new ReviewApi("");
const queue = new RetryQueue();
let state: BrowseState | null = null;
let view: ViewTransform = identity();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

function reviewerName(): string {
  return ($("reviewer") as HTMLInputElement).value.trim();
}

/* ------------------------------------------------------------------ */
/* session list                                                        */

async function showSessionList(): Promise<void> {
  $("session-list").classList.remove("hidden");
  $("workspace").classList.add("hidden");
  $("image-nav").classList.add("hidden");
  const list = $("sessions");
  list.textContent = "";
  try {
    const sessions = await api.listSessions();
    queue.markContact(true);
    if (sessions.length === 0) {
      list.textContent = "No sessions registered yet.";
    }
    for (const s of sessions) {
      const li = document.createElement("li");
      const a = document.createElement("a");
      a.textContent = s.name;
      a.href = `#s/${s.session_id}`;
      const meta = document.createElement("span");
      meta.className = "meta";
      meta.textContent = `${s.run_a} vs ${s.run_b}, ${s.n_images} images`;
      li.append(a, meta);
      list.append(li);
    }
  } catch (error) {
    queue.markContact(false);
    list.textContent = "Cannot reach the server.";
  }
  renderBanner();
}

async function openSession(sessionId: string): Promise<void> {
  const session = await api.getSession(sessionId);
  state = createBrowseState(session);
  $("session-list").classList.add("hidden");
  $("workspace").classList.remove("hidden");
  $("image-nav").classList.remove("hidden");
  $("label-a").textContent = session.run_a;
  $("label-b").textContent = session.run_b;
  $("form-label-a").textContent = session.run_a;
  $("form-label-b").textContent = session.run_b;
  buildThumbs();
  view = identity();
  render();
  await refreshTally();
  render();
}

/** One thumbnail per session image, click to jump. */
function buildThumbs(): void {
  if (!state) {
    return;
  }
  const strip = $("thumbs");
  strip.textContent = "";
  state.session.images.forEach((image, index) => {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "thumb";
    button.title = image.image_id;
    const img = document.createElement("img");
    img.loading = "lazy";
    img.src = api.assetUrl(image.original);
    img.alt = image.image_id;
    button.append(img);
    button.addEventListener("click", () => {
      if (!state) {
        return;
      }
      stashAllForms();
      state = jumpTo(state, index);
      view = identity();
      render();
    });
    strip.append(button);
  });
}

function renderThumbFlags(): void {
  if (!state) {
    return;
  }
  const open = new Set(unassessedIndexes(state));
  const thumbs = $("thumbs").children;
  for (let i = 0; i < thumbs.length; i++) {
    thumbs[i].classList.toggle("unassessed", open.has(i));
    thumbs[i].classList.toggle("current", i === state.index);
  }
}

/* ------------------------------------------------------------------ */
/* rendering                                                           */

function render(): void {
  if (!state) {
    return;
  }
  const image = currentImage(state);
  const total = state.session.images.length;
  $("position").textContent = `${state.index + 1} / ${total}`;

  const flag = $("assessed-flag");
  if (isAssessed(state, image.image_id)) {
    flag.textContent = "assessed";
    flag.className = "flag assessed";
  } else {
    flag.textContent = "unassessed";
    flag.className = "flag unassessed";
  }

  setPane("pane-original", image.original);
  setPane("pane-a", image.run_a_overlay);
  setPane("pane-b", image.run_b_overlay);
  applyView();

  renderForm("run_a");
  renderForm("run_b");
  renderComparison();
  renderThumbFlags();
  renderTally();
  renderBanner();
}

function setPane(id: string, relPath: string | undefined): void {
  const img = $(id) as HTMLImageElement;
  if (relPath) {
    img.src = api.assetUrl(relPath);
    img.style.visibility = "visible";
  } else {
    img.removeAttribute("src");
    img.style.visibility = "hidden";
  }
}

function formFor(runId: RunId): HTMLFormElement {
  return $(`form-${runId}`) as HTMLFormElement;
}

function renderForm(runId: RunId): void {
  if (!state) {
    return;
  }
  const image = currentImage(state);
  const form = formFor(runId);
  const draft = getDraft(state, image.image_id, runId);
  setRadio(form, "rating", draft.rating ?? "");
  setRadio(form, "others_detected", draft.others_detected ?? "");
  (form.elements.namedItem("fp_count") as HTMLInputElement).value = draft.fp_count ?? "";
  (form.elements.namedItem("note") as HTMLInputElement).value = draft.note ?? "";

  const mark = state.submitted.get(draftKey(image.image_id, runId));
  const stateSpan = form.querySelector("[data-state]") as HTMLElement;
  if (mark) {
    stateSpan.textContent = `saved (seq ${mark.seq})`;
    stateSpan.className = "submit-state ok";
  } else if (queue.pending.some((q) => q.payload.image_id === image.image_id && q.payload.run_id === runId)) {
    stateSpan.textContent = "queued offline";
    stateSpan.className = "submit-state err";
  } else {
    stateSpan.textContent = "";
    stateSpan.className = "submit-state";
  }
}

function renderComparison(): void {
  if (!state) {
    return;
  }
  const image = currentImage(state);
  const draft = getDraft(state, image.image_id, "comparison");
  setRadio($("form-compare") as HTMLFormElement, "comparison", draft.comparison ?? "");
}

function setRadio(form: HTMLFormElement, name: string, value: string): void {
  const radios = form.querySelectorAll<HTMLInputElement>(`input[name="${name}"]`);
  radios.forEach((radio) => {
    radio.checked = radio.value === value;
  });
}

function renderTally(): void {
  if (!state) {
    return;
  }
  const tally = displayTally(state);
  if (!tally) {
    return;
  }
  for (const row of tallyRows(tally)) {
    const cells = $(`tally-${row.run}`).querySelectorAll("td");
    row.counts.forEach((count, i) => {
      cells[i].textContent = String(count);
    });
    cells[3].textContent = String(row.falsePositives);
    cells[4].textContent = String(row.imagesAssessed);
  }
  const c = tally.comparisons;
  $("tally-comparisons").textContent =
    `comparisons: A better ${c.a_better} · similar ${c.similar} · B better ${c.b_better}`;
  $("tally-total").textContent = `${tally.n_assessments} assessments`;
}

function renderBanner(): void {
  $("offline-banner").classList.toggle("hidden", !queue.bannerVisible);
}

function renderFieldErrors(form: HTMLElement, errors: Record<string, string>): void {
  form.querySelectorAll<HTMLElement>("[data-error]").forEach((span) => {
    const field = span.dataset.error ?? "";
    span.textContent = errors[field] ?? "";
  });
}

/* ------------------------------------------------------------------ */
/* form handling                                                       */

function readDraft(form: HTMLFormElement): FormDraft {
  const data = new FormData(form);
  const draft: FormDraft = {};
  const rating = data.get("rating");
  if (typeof rating === "string" && rating) {
    draft.rating = rating;
  }
  const others = data.get("others_detected");
  if (typeof others === "string" && others) {
    draft.others_detected = others;
  }
  const fp = data.get("fp_count");
  if (typeof fp === "string" && fp !== "") {
    draft.fp_count = fp;
  }
  const note = data.get("note");
  if (typeof note === "string" && note) {
    draft.note = note;
  }
  return draft;
}

function stashDraft(runId: RunId): void {
  if (!state) {
    return;
  }
  const image = currentImage(state);
  state = setDraft(state, image.image_id, runId, readDraft(formFor(runId)));
}

function stashComparison(): void {
  if (!state) {
    return;
  }
  const image = currentImage(state);
  const data = new FormData($("form-compare") as HTMLFormElement);
  const value = data.get("comparison");
  state = setDraft(state, image.image_id, "comparison", {
    comparison: typeof value === "string" && value ? value : undefined,
  });
}

async function submitRun(runId: RunId): Promise<void> {
  if (!state) {
    return;
  }
  stashDraft(runId);
  stashComparison();
  const image = currentImage(state);
  const form = formFor(runId);
  const draft = {
    ...getDraft(state, image.image_id, runId),
    comparison: getDraft(state, image.image_id, "comparison").comparison,
  };
  const result = validateDraft(draft, {
    session_id: state.session.session_id,
    reviewer: reviewerName(),
    image_id: image.image_id,
    run_id: runId,
  });
  renderFieldErrors(form, result.errors);
  const stateSpan = form.querySelector("[data-state]") as HTMLElement;
  if (!result.ok || !result.payload) {
    stateSpan.textContent = result.errors.reviewer ? "enter a reviewer name" : "fix the fields above";
    stateSpan.className = "submit-state err";
    return;
  }
  await deliver(result.payload, form);
  render();
}

/** POST one payload; on success reconcile the tally with the server. */
async function deliver(payload: AssessmentPayload, form: HTMLElement | null): Promise<void> {
  if (!state) {
    return;
  }
  const key = draftKey(payload.image_id, payload.run_id);
  try {
    const { seq } = await api.submitAssessment(payload);
    queue.markContact(true);
    const previous = state.submitted.get(key);
    state = markSubmitted(state, payload.image_id, payload.run_id, {
      seq,
      rating: payload.rating,
      fp_count: payload.fp_count,
    });
    state = applyOptimistic(state, payload.run_id, payload.rating, payload.fp_count, previous);
    render();
    await refreshTally();
  } catch (error) {
    if (error instanceof ValidationError) {
      if (form) {
        renderFieldErrors(form, error.errors);
      }
    } else if (error instanceof OfflineError) {
      queue.enqueue(payload);
    } else if (error instanceof ApiError && form) {
      const span = form.querySelector("[data-state]") as HTMLElement;
      span.textContent = error.message;
      span.className = "submit-state err";
    }
  }
}

async function refreshTally(): Promise<void> {
  if (!state) {
    return;
  }
  try {
    const tally = await api.getTally(state.session.session_id);
    queue.markContact(true);
    state = reconcileTally(state, tally);
  } catch {
    queue.markContact(false);
  }
}

/* ------------------------------------------------------------------ */
/* navigation and keyboard                                             */

function move(delta: number): void {
  if (!state) {
    return;
  }
  stashAllForms();
  state = step(state, delta);
  view = identity();
  render();
}

function moveToNextUnassessed(): void {
  if (!state) {
    return;
  }
  stashAllForms();
  const open = unassessedIndexes(state);
  const after = open.find((i) => i > (state as BrowseState).index);
  const target = after ?? open[0];
  if (target !== undefined) {
    state = jumpTo(state, target);
    view = identity();
    render();
  }
}

function stashAllForms(): void {
  stashDraft("run_a");
  stashDraft("run_b");
  stashComparison();
}

function handleKey(event: KeyboardEvent): void {
  const active = document.activeElement;
  const inFormField =
    active instanceof HTMLInputElement ||
    active instanceof HTMLTextAreaElement ||
    active instanceof HTMLSelectElement;
  const action = keyAction(event.key, { shift: event.shiftKey, inFormField });
  if (!action || !state) {
    return;
  }
  event.preventDefault();
  switch (action.type) {
    case "next":
      move(1);
      break;
    case "prev":
      move(-1);
      break;
    case "next_unassessed":
      moveToNextUnassessed();
      break;
    case "reset_view":
      view = identity();
      applyView();
      break;
    case "rate": {
      const image = currentImage(state);
      const draft = getDraft(state, image.image_id, action.run);
      state = setDraft(state, image.image_id, action.run, {
        ...draft,
        rating: RATINGS[action.ratingIndex],
      });
      renderForm(action.run);
      break;
    }
  }
}

/* ------------------------------------------------------------------ */
/* synchronized zoom and pan                                           */

function applyView(): void {
  const css = cssTransform(view);
  for (const id of ["pane-original", "pane-a", "pane-b"]) {
    ($(id) as HTMLImageElement).style.transform = css;
  }
}

function wireViewports(): void {
  const viewports = document.querySelectorAll<HTMLElement>(".viewport");
  viewports.forEach((vp) => {
    vp.addEventListener(
      "wheel",
      (event) => {
        event.preventDefault();
        const rect = vp.getBoundingClientRect();
        const factor = event.deltaY < 0 ? 1.25 : 0.8;
        view = zoomAt(
          view,
          event.clientX - rect.left,
          event.clientY - rect.top,
          factor,
          rect.width,
          rect.height,
        );
        applyView();
      },
      { passive: false },
    );
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    vp.addEventListener("pointerdown", (event) => {
      dragging = true;
      lastX = event.clientX;
      lastY = event.clientY;
      vp.setPointerCapture(event.pointerId);
    });
    vp.addEventListener("pointermove", (event) => {
      if (!dragging) {
        return;
      }
      const rect = vp.getBoundingClientRect();
      view = panBy(view, event.clientX - lastX, event.clientY - lastY, rect.width, rect.height);
      lastX = event.clientX;
      lastY = event.clientY;
      applyView();
    });
    vp.addEventListener("pointerup", () => {
      dragging = false;
    });
  });
}

/* ------------------------------------------------------------------ */
/* offline retry                                                       */

async function flushQueue(): Promise<void> {
  if (queue.size === 0) {
    renderBanner();
    return;
  }
  const accepted = await queue.flush(
    (payload) => api.submitAssessment(payload),
    () => {
      /* rejected submissions surface on their forms at next render */
    },
  );
  if (accepted.length > 0 && state) {
    for (const { payload, result } of accepted) {
      state = markSubmitted(state, payload.image_id, payload.run_id, {
        seq: result.seq,
        rating: payload.rating,
        fp_count: payload.fp_count,
      });
    }
    await refreshTally();
  }
  render();
}

/* ------------------------------------------------------------------ */
/* boot                                                                */

function wireForms(): void {
  (["run_a", "run_b"] as RunId[]).forEach((runId) => {
    const form = formFor(runId);
    form.addEventListener("change", () => stashDraft(runId));
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void submitRun(runId);
    });
  });
  $("form-compare").addEventListener("change", () => stashComparison());
}

function route(): void {
  const match = location.hash.match(/^#s\/([0-9a-f]+)$/);
  if (match) {
    void openSession(match[1]).catch(() => showSessionList());
  } else {
    void showSessionList();
  }
}

function boot(): void {
  const reviewer = $("reviewer") as HTMLInputElement;
  reviewer.value = localStorage.getItem("reviewer") ?? "";
  reviewer.addEventListener("change", () => {
    localStorage.setItem("reviewer", reviewer.value.trim());
  });

  $("prev").addEventListener("click", () => move(-1));
  $("next").addEventListener("click", () => move(1));
  $("next-unassessed").addEventListener("click", () => moveToNextUnassessed());
  $("retry-now").addEventListener("click", () => void flushQueue());
  document.addEventListener("keydown", handleKey);
  wireForms();
  wireViewports();
  window.addEventListener("hashchange", route);

  window.setInterval(() => {
    if (queue.bannerVisible) {
      void api
        .health()
        .then(() => {
          queue.markContact(true);
          return flushQueue();
        })
        .catch(() => {
          queue.markContact(false);
          renderBanner();
        });
    }
  }, 5000);

  route();
}

boot();
