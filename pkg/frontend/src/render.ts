// Pure HTML renderers: every screen is a function from state to a markup
// string, so the round flow is testable without a DOM.

import { countdown, fraction, money } from "./format.js";
import { ClientState, cumulativeEarnings, isLocked, phaseSummaries } from "./state.js";
import { SessionView } from "./types.js";

function escapeHtml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

export function renderErrorBanner(message: string | null): string {
    if (!message) return "";
    return `<div class="banner error">${escapeHtml(message)}</div>`;
}

export function renderDiscrepancyBanner(message: string | null): string {
    if (!message) return "";
    return `<div class="banner discrepancy">Data check failed: ${escapeHtml(message)}</div>`;
}

export function renderAutofillNotice(message: string | null): string {
    if (!message) return "";
    return `<div class="banner autofill">${escapeHtml(message)}</div>`;
}

export function renderJoinForm(defaultUrl: string): string {
    return `
<section class="join">
  <h1>Resource allocation game</h1>
  <label>Server <input id="server-url" value="${escapeHtml(defaultUrl)}"></label>
  <label>Session id <input id="session-id" placeholder="paste session id"></label>
  <label>Your name <input id="player-name" placeholder="anonymous"></label>
  <button id="join-button">Join session</button>
</section>`;
}

export function renderLobby(view: SessionView): string {
    const seats = view.seats
        .map((seat) => `<li>seat ${seat.seat}: ${escapeHtml(seat.name)}</li>`)
        .join("");
    return `
<section class="lobby">
  <h2>Waiting for players (${view.seats.length}/4)</h2>
  <ul>${seats}</ul>
</section>`;
}

const TUTORIAL_TEXT =
    "Practice round (no stakes): you hold an endowment; choose the fraction " +
    "to contribute to the common pool. The pool grows by 60% and the " +
    "mechanism splits it back. Whatever you keep stays yours.";

export function renderRound(state: ClientState): string {
    const view = state.view!;
    const locked = isLocked(state);
    const phaseLabel = view.tutorial
        ? "Tutorial"
        : `Phase ${(view.phase_index ?? 0) + 1} of ${view.phases.length}: mechanism ${escapeHtml(view.phase ?? "")}`;
    const roundLabel = view.tutorial
        ? "practice"
        : `round ${view.round} / ${view.rounds_per_phase}`;
    const waiting = view.seats.filter((seat) => !seat.submitted).length;
    const slider = locked
        ? `<p class="waiting">Contribution submitted - waiting for others (${waiting} left)</p>`
        : `
  <label>Contribute <span id="slider-value">${fraction(state.pendingContribution)}</span>
    of your endowment
    <input id="contribution-slider" type="range" min="0" max="1" step="0.01"
           value="${fraction(state.pendingContribution)}">
  </label>
  <button id="submit-contribution">Submit contribution</button>`;
    return `
<section class="round">
  <h2>${phaseLabel}</h2>
  <p>${roundLabel} &middot; your endowment: ${money(view.own.endowment)}
     &middot; time left: <span id="countdown">${countdown(view.deadline_seconds)}</span></p>
  ${view.tutorial ? `<p class="tutorial">${TUTORIAL_TEXT}</p>` : ""}
  ${slider}
  ${renderOutcomeHistory(state)}
</section>`;
}

export function renderOutcomeHistory(state: ClientState): string {
    const view = state.view!;
    if (view.outcomes.length === 0) return "";
    const rows = view.outcomes
        .slice()
        .reverse()
        .map((outcome) => {
            const own = view.own.seat;
            const flag = outcome.autofill[own] ? " (auto-filled)" : "";
            const label = outcome.tutorial ? "tutorial" : `${escapeHtml(outcome.phase)} r${outcome.round}`;
            return `<tr>
  <td>${label}</td>
  <td>${fraction(outcome.contributions[own])}${flag}</td>
  <td>${money(outcome.pool)}</td>
  <td>${money(outcome.payouts[own])}</td>
  <td>${money(outcome.returns[own])}</td>
</tr>`;
        })
        .join("");
    return `
<table class="history">
  <thead><tr><th>round</th><th>you gave</th><th>pool</th><th>your payout</th><th>your return</th></tr></thead>
  <tbody>${rows}</tbody>
</table>
<p class="earnings">Cumulative earnings: ${money(cumulativeEarnings(view))}</p>`;
}

export function renderResults(state: ClientState): string {
    const view = state.view!;
    const summaries = phaseSummaries(view);
    const rows = summaries
        .map(
            (row) =>
                `<tr><td>${escapeHtml(row.phase)}</td><td>${row.rounds}</td><td>${money(row.meanReturn)}</td></tr>`
        )
        .join("");
    const aborted = view.state === "aborted";
    return `
<section class="results">
  <h2>${aborted ? "Session aborted (partial results)" : "Session complete"}</h2>
  <table class="summary">
    <thead><tr><th>mechanism phase</th><th>rounds</th><th>your average return</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <p class="earnings">Total earnings: ${money(cumulativeEarnings(view))}</p>
</section>`;
}

export function renderApp(state: ClientState, joined: boolean, serverUrl: string): string {
    const banners =
        renderErrorBanner(state.lastError) +
        renderDiscrepancyBanner(state.discrepancy) +
        renderAutofillNotice(state.autofillNotice);
    if (!joined || !state.view) return banners + renderJoinForm(serverUrl);
    const view = state.view;
    if (view.state === "lobby") return banners + renderLobby(view);
    if (view.state === "collecting") return banners + renderRound(state);
    return banners + renderResults(state);
}
