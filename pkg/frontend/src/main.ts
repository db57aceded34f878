// Browser entry point: join flow, 1-second polling, slider wiring, and
// reconnect from the locally stored seat token.

import { loadSeat, PlayServiceClient, ServiceError, storeSeat } from "./api.js";
import { applyView, ClientState, initialState, lockSubmission } from "./state.js";
import { renderApp } from "./render.js";

const POLL_INTERVAL_MS = 1000;

interface App {
    client: PlayServiceClient | null;
    sessionId: string;
    token: string;
    state: ClientState;
    pollTimer: number | null;
}

const app: App = {
    client: null,
    sessionId: "",
    token: "",
    state: initialState(),
    pollTimer: null,
};

function root(): HTMLElement {
    return document.getElementById("app")!;
}

function render(): void {
    const joined = app.client !== null && app.token !== "";
    root().innerHTML = renderApp(app.state, joined, defaultServerUrl());
    bindHandlers();
}

function defaultServerUrl(): string {
    return window.location.origin.startsWith("http")
        ? window.location.origin
        : "http://127.0.0.1:8000";
}

function bindHandlers(): void {
    const joinButton = document.getElementById("join-button");
    if (joinButton) joinButton.addEventListener("click", () => void join());

    const slider = document.getElementById("contribution-slider") as HTMLInputElement | null;
    if (slider) {
        slider.addEventListener("input", () => {
            app.state.pendingContribution = parseFloat(slider.value);
            const label = document.getElementById("slider-value");
            if (label) label.textContent = slider.value;
        });
    }
    const submit = document.getElementById("submit-contribution");
    if (submit) submit.addEventListener("click", () => void contribute());
}

async function join(): Promise<void> {
    const url = (document.getElementById("server-url") as HTMLInputElement).value.trim();
    const sessionId = (document.getElementById("session-id") as HTMLInputElement).value.trim();
    const name = (document.getElementById("player-name") as HTMLInputElement).value.trim() || "anonymous";
    app.client = new PlayServiceClient(url);
    app.sessionId = sessionId;

    const stored = loadSeat(sessionId, window.localStorage);
    if (stored) {
        // reconnect path: reuse the seat token instead of taking a new seat
        app.token = stored.token;
        try {
            await poll();
            startPolling();
            return;
        } catch {
            app.token = "";
        }
    }
    try {
        const seat = await app.client.join(sessionId, name);
        app.token = seat.token;
        storeSeat(sessionId, { token: seat.token, seat: seat.seat, name }, window.localStorage);
        await poll();
        startPolling();
    } catch (error) {
        app.state.lastError = error instanceof ServiceError ? error.message : String(error);
        render();
    }
}

async function contribute(): Promise<void> {
    if (!app.client || !app.state.view) return;
    const value = app.state.pendingContribution;
    app.state = lockSubmission(app.state); // optimistic lock until the server answers
    render();
    try {
        await app.client.contribute(app.sessionId, app.token, value);
        await poll();
    } catch (error) {
        // server rejection: surface it and unlock without losing the input
        app.state = { ...app.state, submittedRound: null };
        app.state.lastError = error instanceof ServiceError ? error.message : String(error);
        render();
    }
}

async function poll(): Promise<void> {
    if (!app.client || !app.token) return;
    const view = await app.client.state(app.sessionId, app.token);
    app.state = applyView(app.state, view, view.endowments);
    render();
}

function startPolling(): void {
    if (app.pollTimer !== null) window.clearInterval(app.pollTimer);
    app.pollTimer = window.setInterval(() => {
        void poll().catch(() => {
            /* transient poll failures: retry on the next tick */
        });
    }, POLL_INTERVAL_MS);
}

window.addEventListener("load", render);
