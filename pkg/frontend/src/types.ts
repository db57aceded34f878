// Payload shapes of the play-service JSON API.

export interface SeatInfo {
    seat: number;
    name: string;
    submitted: boolean;
    dropped: boolean;
}

export interface OwnHistoryEntry {
    phase: string;
    round: number;
    tutorial: boolean;
    contribution: number;
    autofill: boolean;
    payout: number;
    return: number;
}

export interface OutcomeRecord {
    type: string;
    phase_index: number;
    phase: string;
    round: number;
    tutorial: boolean;
    contributions: number[];
    autofill: boolean[];
    payouts: number[];
    returns: number[];
    pool: number;
    welfare: number;
}

export interface OwnView {
    seat: number;
    endowment: number;
    submitted: boolean;
    cumulative_return: number;
    history: OwnHistoryEntry[];
}

export interface SessionView {
    session_id: string;
    state: "lobby" | "collecting" | "finished" | "aborted";
    endowments: number[];
    phases: string[];
    phase_index: number | null;
    phase: string | null;
    tutorial: boolean;
    round: number | null;
    rounds_per_phase: number;
    deadline_seconds: number | null;
    seats: SeatInfo[];
    own: OwnView;
    outcomes: OutcomeRecord[];
}

export interface JoinResponse {
    token: string;
    seat: number;
    session_id: string;
}

export interface ApiError {
    code: string;
    message: string;
}

export interface PhaseSummary {
    phase: string;
    meanReturn: number;
    rounds: number;
}
