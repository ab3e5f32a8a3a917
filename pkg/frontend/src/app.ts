/** DOM wiring: queue list with status badges, narration timeline, span chip
 * editing, and the keyboard-first accept/reject/next loop. All state
 * transitions go through the pure functions in model.ts. */

import {
  ApiClient,
  ApiError,
  OfflineError,
  type ClipRecord,
  type SpanPair,
  type TripletRecord,
} from "./api.js";
import {
  CATEGORIES,
  CLIP_SECONDS,
  type ReviewDraft,
  buildDecision,
  clampSpan,
  editSpan,
  addSpan,
  removeSpan,
  isDirty,
  parseAnswerSegments,
  startDraft,
  validateDraft,
} from "./model.js";

interface AppState {
  queue: TripletRecord[];
  index: number;
  draft: ReviewDraft | null;
  clip: ClipRecord | null;
  reviewed: number;
}

const REVIEWABLE = "llm_filtered";

export function createApp(root: HTMLElement, api: ApiClient, reviewerId: string): { reload: () => Promise<void> } {
  const state: AppState = { queue: [], index: 0, draft: null, clip: null, reviewed: 0 };

  root.innerHTML = `
    <header>
      <h1>triplet review</h1>
      <span id="progress"></span>
    </header>
    <div id="banner" hidden></div>
    <main>
      <aside id="queue-panel"><ul id="queue"></ul></aside>
      <section id="review" hidden>
        <div id="timeline"></div>
        <h2 id="question"></h2>
        <p id="answer"></p>
        <div id="chips"></div>
        <div id="validation" class="problems"></div>
        <div id="categories"></div>
        <div class="actions">
          <button id="accept" title="accept [a]">accept</button>
          <button id="reject" title="reject [r]">reject</button>
          <button id="skip" title="next [n]">skip</button>
        </div>
      </section>
      <section id="empty" hidden><p>queue is empty — nothing awaiting review.</p></section>
    </main>`;

  const el = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;

  function banner(text: string, retry: boolean): void {
    const node = el("banner");
    node.hidden = false;
    node.textContent = text;
    if (retry) {
      const button = document.createElement("button");
      button.textContent = "retry";
      button.addEventListener("click", () => void reload());
      node.append(" ", button);
    }
  }

  function renderProgress(): void {
    const remaining = state.queue.filter((t) => t.status === REVIEWABLE).length;
    el("progress").textContent = `${state.reviewed} reviewed · ${remaining} remaining`;
  }

  function renderQueue(): void {
    const list = el("queue");
    list.innerHTML = "";
    state.queue.forEach((triplet, i) => {
      const item = document.createElement("li");
      item.className = i === state.index ? "selected" : "";
      const badge = document.createElement("span");
      badge.className = `badge ${triplet.status}`;
      badge.textContent = triplet.category ?? triplet.status;
      const text = document.createElement("span");
      text.textContent = triplet.question;
      item.append(badge, text);
      item.addEventListener("click", () => {
        state.index = i;
        void showCurrent();
      });
      list.appendChild(item);
    });
  }

  function renderTimeline(): void {
    const timeline = el("timeline");
    timeline.innerHTML = "";
    if (!state.clip) return;
    for (const narration of state.clip.narrations) {
      const end = narration.end ?? narration.start;
      const block = document.createElement("div");
      block.className = "narration";
      block.style.left = `${(narration.start / CLIP_SECONDS) * 100}%`;
      block.style.width = `${(Math.max(end - narration.start, 0.5) / CLIP_SECONDS) * 100}%`;
      block.title = `${narration.start.toFixed(1)}–${end.toFixed(1)}s  ${narration.text}`;
      timeline.appendChild(block);
    }
    if (state.draft) {
      for (const [marker, pairs] of Object.entries(state.draft.spans)) {
        for (const [s, e] of pairs) {
          const chip = document.createElement("div");
          chip.className = "evidence";
          chip.style.left = `${(s / CLIP_SECONDS) * 100}%`;
          chip.style.width = `${(Math.max(e - s, 0.5) / CLIP_SECONDS) * 100}%`;
          chip.title = `${marker} ${s}–${e}s`;
          timeline.appendChild(chip);
        }
      }
    }
  }

  function renderAnswer(triplet: TripletRecord): void {
    el("question").textContent = triplet.question;
    const answer = el("answer");
    answer.innerHTML = "";
    for (const segment of parseAnswerSegments(triplet.answer)) {
      const span = document.createElement("span");
      span.textContent = segment.text;
      if (segment.marker) {
        span.className = "grounded";
        span.dataset.marker = segment.marker;
      }
      answer.appendChild(span);
    }
  }

  function renderChips(editable: boolean): void {
    const chips = el("chips");
    chips.innerHTML = "";
    if (!state.draft) return;
    const draft = state.draft;
    for (const [marker, pairs] of Object.entries(draft.spans)) {
      const row = document.createElement("div");
      row.className = "chip-row";
      const label = document.createElement("strong");
      label.textContent = marker;
      row.appendChild(label);
      pairs.forEach((pair, i) => {
        const chip = document.createElement("span");
        chip.className = "chip";
        (["start", "end"] as const).forEach((which, j) => {
          const input = document.createElement("input");
          input.type = "number";
          input.step = "0.5";
          input.min = "0";
          input.max = String(CLIP_SECONDS);
          input.value = String(pair[j]);
          input.disabled = !editable;
          input.ariaLabel = `${marker} interval ${i} ${which}`;
          input.addEventListener("change", () => {
            const next: SpanPair = [...draft.spans[marker][i]] as SpanPair;
            next[j] = Number(input.value);
            state.draft = editSpan(state.draft!, marker, i, clampSpan(next));
            refreshDraftViews();
          });
          chip.appendChild(input);
          if (j === 0) chip.append("–");
        });
        if (editable && pairs.length > 1) {
          const drop = document.createElement("button");
          drop.textContent = "×";
          drop.title = "remove interval";
          drop.addEventListener("click", () => {
            state.draft = removeSpan(state.draft!, marker, i);
            refreshDraftViews();
          });
          chip.appendChild(drop);
        }
        row.appendChild(chip);
      });
      if (editable) {
        const more = document.createElement("button");
        more.textContent = "+ interval";
        more.addEventListener("click", () => {
          const last = draft.spans[marker][draft.spans[marker].length - 1];
          state.draft = addSpan(state.draft!, marker, clampSpan([last[1], Math.min(last[1] + 5, CLIP_SECONDS)]));
          refreshDraftViews();
        });
        row.appendChild(more);
      }
      chips.appendChild(row);
    }
  }

  function renderCategories(): void {
    const box = el("categories");
    box.innerHTML = "";
    for (const category of CATEGORIES) {
      const button = document.createElement("button");
      button.textContent = category;
      button.className = state.draft?.category === category ? "category selected" : "category";
      button.addEventListener("click", () => {
        if (state.draft) {
          state.draft = { ...state.draft, category };
          renderCategories();
        }
      });
      box.appendChild(button);
    }
    const note = document.createElement("small");
    note.textContent = " category U is filed automatically on reject";
    box.appendChild(note);
  }

  function currentEditable(): boolean {
    return state.queue[state.index]?.status === REVIEWABLE;
  }

  function refreshDraftViews(): void {
    const editable = currentEditable();
    renderChips(editable);
    renderTimeline();
    const problems = state.draft ? validateDraft(state.draft) : [];
    el("validation").textContent = problems.join("; ");
    const acceptButton = el("accept") as HTMLButtonElement;
    acceptButton.disabled = problems.length > 0 || !editable;
    acceptButton.textContent = state.draft && isDirty(state.draft) ? "accept with edits" : "accept";
    (el("reject") as HTMLButtonElement).disabled = !editable;
  }

  async function showCurrent(): Promise<void> {
    const triplet = state.queue[state.index];
    el("review").hidden = !triplet;
    el("empty").hidden = !!triplet;
    renderProgress();
    renderQueue();
    if (!triplet) return;
    state.draft = startDraft(triplet, crypto.randomUUID());
    try {
      state.clip = await api.getClip(triplet.clip_id);
    } catch {
      state.clip = null; // timeline is optional context; review still works
    }
    renderAnswer(triplet);
    renderCategories();
    refreshDraftViews();
  }

  async function submit(action: "accept" | "reject"): Promise<void> {
    if (!state.draft || !currentEditable()) return;
    if (action === "accept" && !state.draft.category) {
      banner("pick a category A–F before accepting", false);
      return;
    }
    el("banner").hidden = true;
    const body = buildDecision(state.draft, action, reviewerId);
    let updated: TripletRecord;
    try {
      updated = await api.submitDecision(state.draft.tripletId, body);
    } catch (err) {
      if (err instanceof ApiError) {
        const fields = Object.entries(err.fields)
          .map(([path, msg]) => `${path}: ${msg}`)
          .join("; ");
        banner(`${err.status} ${err.code}: ${err.message}${fields ? " — " + fields : ""}`, false);
      } else if (err instanceof OfflineError) {
        banner("service unreachable", true);
      }
      return;
    }
    state.queue[state.index] = updated;
    state.reviewed += 1;
    const nextIndex = state.queue.findIndex((t) => t.status === REVIEWABLE);
    state.index = nextIndex === -1 ? state.queue.length : nextIndex;
    await showCurrent();
  }

  function next(): void {
    const after = state.queue.findIndex((t, i) => i > state.index && t.status === REVIEWABLE);
    state.index = after === -1 ? state.queue.length : after;
    void showCurrent();
  }

  root.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key === "a") void submit("accept");
    else if (event.key === "r") void submit("reject");
    else if (event.key === "n" || event.key === "j") next();
    else if (state.draft && event.key >= "1" && event.key <= "6") {
      state.draft = { ...state.draft, category: CATEGORIES[Number(event.key) - 1] };
      renderCategories();
    }
  });

  el("accept").addEventListener("click", () => void submit("accept"));
  el("reject").addEventListener("click", () => void submit("reject"));
  el("skip").addEventListener("click", next);

  async function reload(): Promise<void> {
    el("banner").hidden = true;
    try {
      const page = await api.loadQueue({ status: REVIEWABLE, limit: 200 });
      state.queue = page.items;
      state.index = 0;
      await showCurrent();
    } catch (err) {
      if (err instanceof OfflineError) banner("service unreachable", true);
      else banner(String(err), true);
    }
  }

  return { reload };
}
