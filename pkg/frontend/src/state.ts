// Client-side session state: reduces polled server views into what the UI
// renders, independently re-checks pool conservation on every outcome, and
// derives the per-phase results summary.

import { OutcomeRecord, PhaseSummary, SessionView } from "./types.js";

export const GROWTH = 1.6;
const CONSERVATION_TOL = 1e-6;

export interface OutcomeCheck {
    consistent: boolean;
    expectedPool: number;
    reportedPool: number;
}

/** Recompute the grown pool from contributions and endowments; a mismatch
 * with the server's payout sum is surfaced to the player as a discrepancy. */
export function checkOutcome(outcome: OutcomeRecord, endowments: number[]): OutcomeCheck {
    let pool = 0;
    for (let i = 0; i < outcome.contributions.length; i++) {
        pool += outcome.contributions[i] * endowments[i];
    }
    const expectedPool = GROWTH * pool;
    const payoutSum = outcome.payouts.reduce((a, b) => a + b, 0);
    return {
        consistent:
            Math.abs(payoutSum - expectedPool) <= CONSERVATION_TOL &&
            Math.abs(outcome.pool - expectedPool) <= CONSERVATION_TOL,
        expectedPool,
        reportedPool: outcome.pool,
    };
}

/** Per-phase mean return for one seat, tutorial rounds excluded. */
export function phaseSummaries(view: SessionView): PhaseSummary[] {
    const sums = new Map<string, { total: number; rounds: number }>();
    for (const entry of view.own.history) {
        if (entry.tutorial) continue;
        const bucket = sums.get(entry.phase) ?? { total: 0, rounds: 0 };
        bucket.total += entry.return;
        bucket.rounds += 1;
        sums.set(entry.phase, bucket);
    }
    return view.phases
        .filter((phase) => sums.has(phase))
        .map((phase) => {
            const bucket = sums.get(phase)!;
            return { phase, meanReturn: bucket.total / bucket.rounds, rounds: bucket.rounds };
        });
}

/** Cumulative earnings recomputed client-side (tutorial rounds excluded). */
export function cumulativeEarnings(view: SessionView): number {
    return view.own.history
        .filter((entry) => !entry.tutorial)
        .reduce((total, entry) => total + entry.return, 0);
}

export interface ClientState {
    view: SessionView | null;
    endowments: number[];
    pendingContribution: number;
    submittedRound: string | null; // "<phase_index>:<round>" lock key
    lastError: string | null;
    discrepancy: string | null;
    autofillNotice: string | null;
}

export function initialState(): ClientState {
    return {
        view: null,
        endowments: [],
        pendingContribution: 0.5,
        submittedRound: null,
        lastError: null,
        discrepancy: null,
        autofillNotice: null,
    };
}

export function roundKey(view: SessionView): string {
    return `${view.phase_index}:${view.round}`;
}

/** Fold a fresh server view into the client state. */
export function applyView(state: ClientState, view: SessionView, endowments: number[]): ClientState {
    const next: ClientState = { ...state, view, endowments, lastError: null };
    for (const outcome of view.outcomes) {
        const check = checkOutcome(outcome, endowments);
        if (!check.consistent) {
            next.discrepancy =
                `pool mismatch in ${outcome.phase} round ${outcome.round}: ` +
                `server ${check.reportedPool.toFixed(6)} vs recomputed ${check.expectedPool.toFixed(6)}`;
        }
    }
    const own = view.own;
    const lastOutcome = view.outcomes[view.outcomes.length - 1];
    if (lastOutcome && lastOutcome.autofill[own.seat]) {
        next.autofillNotice =
            `round ${lastOutcome.round} timed out: your contribution was ` +
            `auto-filled randomly and flagged for exclusion`;
    }
    if (view.state === "collecting" && !own.submitted && state.submittedRound !== roundKey(view)) {
        next.submittedRound = null; // new round: unlock the slider
    }
    return next;
}

export function lockSubmission(state: ClientState): ClientState {
    if (!state.view) return state;
    return { ...state, submittedRound: roundKey(state.view) };
}

export function isLocked(state: ClientState): boolean {
    if (!state.view) return false;
    if (state.view.own.submitted) return true;
    return state.submittedRound === roundKey(state.view);
}
