/** Console state machine.
 *
 * One rule dominates: user input is never lost. Drafts are cleared only
 * after the backend accepts them; any failure keeps the text and raises a
 * banner instead. After every mutation the active view is re-fetched with
 * GET /sessions/{id}, so what the doctor sees is always the service's own
 * committed snapshot, not a client-side guess.
 */

import { ApiClient, ApiError } from "./client.js";
import type { InputMode, Recommendation, SessionSummary, SessionView } from "./types.js";

export interface ConsoleState {
  sessions: SessionSummary[];
  active: SessionView | null;
  inputMode: InputMode;
  draftText: string;
  queryResult: Recommendation | null;
  errorBanner: string | null;
  busy: boolean;
}

export function initialState(): ConsoleState {
  return {
    sessions: [],
    active: null,
    inputMode: "typewriting",
    draftText: "",
    queryResult: null,
    errorBanner: null,
    busy: false,
  };
}

type Listener = (state: ConsoleState) => void;

export class ConsoleStore {
  state: ConsoleState = initialState();
  private listeners: Listener[] = [];

  constructor(private client: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private update(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    this.emit();
  }

  private failure(err: unknown): void {
    const message =
      err instanceof ApiError
        ? `${err.status} ${err.code}: ${err.message}`
        : "backend unreachable — your input has been kept";
    this.update({ errorBanner: message, busy: false });
  }

  setInputMode(mode: InputMode): void {
    this.update({ inputMode: mode });
  }

  setDraft(text: string): void {
    this.update({ draftText: text });
  }

  dismissError(): void {
    this.update({ errorBanner: null });
  }

  async refreshSessions(): Promise<void> {
    try {
      const { sessions } = await this.client.listSessions();
      this.update({ sessions });
    } catch (err) {
      this.failure(err);
    }
  }

  async openSession(sessionId: string): Promise<void> {
    try {
      const view = await this.client.getSession(sessionId);
      this.update({ active: view, errorBanner: null });
    } catch (err) {
      this.failure(err);
    }
  }

  async newSession(): Promise<void> {
    this.update({ busy: true });
    try {
      const { session_id } = await this.client.createSession();
      const view = await this.client.getSession(session_id);
      this.update({ active: view, busy: false, errorBanner: null });
      await this.refreshSessions();
    } catch (err) {
      this.failure(err);
    }
  }

  /** Re-fetch the active session so the view is the service's snapshot. */
  private async poll(sessionId: string): Promise<void> {
    const view = await this.client.getSession(sessionId);
    this.update({ active: view });
  }

  private async submitToSession(input: { text?: string; audio_ref?: string }): Promise<boolean> {
    const active = this.state.active;
    if (!active) {
      this.update({ errorBanner: "open or create a session first" });
      return false;
    }
    this.update({ busy: true });
    try {
      await this.client.postUtterance(active.session_id, input);
      await this.poll(active.session_id);
      this.update({ busy: false, errorBanner: null });
      await this.refreshSessions();
      return true;
    } catch (err) {
      this.failure(err);
      return false;
    }
  }

  /** Typewriting mode: send the draft; clear it only on success. */
  async submitTypewriting(): Promise<void> {
    const text = this.state.draftText.trim();
    if (!text) return;
    const accepted = await this.submitToSession({ text });
    if (accepted) this.update({ draftText: "" });
  }

  /** Speaking mode: hand the service an audio reference to transcribe. */
  async submitSpeaking(audioRef: string): Promise<void> {
    await this.submitToSession({ audio_ref: audioRef });
  }

  /** Uploading mode: one EHR JSON file. */
  async submitUpload(file: Blob, filename: string): Promise<void> {
    const active = this.state.active;
    if (!active) {
      this.update({ errorBanner: "open or create a session first" });
      return;
    }
    this.update({ busy: true });
    try {
      await this.client.uploadEhr(active.session_id, file, filename);
      await this.poll(active.session_id);
      this.update({ busy: false, errorBanner: null });
    } catch (err) {
      this.failure(err);
    }
  }

  /** Bottom text field: stateless one-shot query. Draft kept on failure. */
  async submitDirectQuery(): Promise<void> {
    const text = this.state.draftText.trim();
    if (!text) return;
    this.update({ busy: true });
    try {
      const result = await this.client.query(text);
      this.update({ queryResult: result, draftText: "", busy: false, errorBanner: null });
    } catch (err) {
      this.failure(err);
    }
  }
}
