// Thin fetch client for the play service. One in-flight request per kind;
// polling callers are expected to tolerate transient failures and retry.

import { JoinResponse, SessionView, ApiError } from "./types.js";

export class ServiceError extends Error {
    code: string;
    status: number;

    constructor(code: string, message: string, status: number) {
        super(message);
        this.code = code;
        this.status = status;
    }
}

async function parseError(response: Response): Promise<ServiceError> {
    let error: ApiError = { code: "http_error", message: `HTTP ${response.status}` };
    try {
        const body = await response.json();
        if (body && body.error) error = body.error as ApiError;
        else if (body && body.detail) error = { code: "bad_request", message: JSON.stringify(body.detail) };
    } catch {
        // non-JSON error body: keep the generic message
    }
    return new ServiceError(error.code, error.message, response.status);
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
    const response = await fetch(url, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
}

export class PlayServiceClient {
    constructor(readonly baseUrl: string) {}

    join(sessionId: string, name: string): Promise<JoinResponse> {
        return request<JoinResponse>(`${this.baseUrl}/sessions/${sessionId}/join`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ name }),
        });
    }

    state(sessionId: string, token: string): Promise<SessionView> {
        const query = new URLSearchParams({ token });
        return request<SessionView>(`${this.baseUrl}/sessions/${sessionId}/state?${query}`);
    }

    contribute(sessionId: string, token: string, contribution: number): Promise<{ status: string }> {
        return request(`${this.baseUrl}/sessions/${sessionId}/contribute`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ token, contribution }),
        });
    }

    async log(sessionId: string): Promise<Record<string, unknown>[]> {
        const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/log`);
        if (!response.ok) throw await parseError(response);
        const text = await response.text();
        return text
            .trim()
            .split("\n")
            .filter((line) => line.length > 0)
            .map((line) => JSON.parse(line));
    }
}

const STORAGE_PREFIX = "shepherd-seat:";

export interface StoredSeat {
    token: string;
    seat: number;
    name: string;
}

export function storeSeat(sessionId: string, seat: StoredSeat, storage: Storage): void {
    storage.setItem(STORAGE_PREFIX + sessionId, JSON.stringify(seat));
}

export function loadSeat(sessionId: string, storage: Storage): StoredSeat | null {
    const raw = storage.getItem(STORAGE_PREFIX + sessionId);
    if (!raw) return null;
    try {
        return JSON.parse(raw) as StoredSeat;
    } catch {
        return null;
    }
}
