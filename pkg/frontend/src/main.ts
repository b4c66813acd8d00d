/** Browser bootstrap: wires the store and views to the DOM.
 *
 * Deliberately thin — all state transitions live in the store, all markup
 * in the render module, so both are testable without a browser.
 */

import { ApiClient } from "./client.js";
import { MicRecorder } from "./recorder.js";
import { renderApp } from "./render.js";
import { ConsoleStore } from "./store.js";
import type { InputMode } from "./types.js";

declare global {
  interface Window {
    DXCOPILOT_BASE_URL?: string;
    DXCOPILOT_BEARER_TOKEN?: string;
    DXCOPILOT_DEMO_AUDIO_REF?: string;
  }
}

function bootstrap(): void {
  const root = document.getElementById("app");
  const draft = document.getElementById("draft") as HTMLTextAreaElement | null;
  const sendButton = document.getElementById("send");
  const queryButton = document.getElementById("query");
  const newButton = document.getElementById("new-session");
  const recordButton = document.getElementById("record");
  const filePicker = document.getElementById("file") as HTMLInputElement | null;
  if (!root || !draft || !sendButton || !queryButton || !newButton || !recordButton || !filePicker) {
    throw new Error("console markup is incomplete");
  }

  const client = new ApiClient({
    baseUrl: window.DXCOPILOT_BASE_URL ?? "",
    bearerToken: window.DXCOPILOT_BEARER_TOKEN,
  });
  const store = new ConsoleStore(client);
  const recorder = new MicRecorder({ demoAudioRef: window.DXCOPILOT_DEMO_AUDIO_REF });

  store.subscribe((state) => {
    root.innerHTML = renderApp(state);
    // the textarea lives outside the re-rendered tree so typing is never lost,
    // but keep it in sync when the store restores a preserved draft
    if (draft.value !== state.draftText) draft.value = state.draftText;
    root.querySelectorAll<HTMLElement>(".mode-tab").forEach((tab) => {
      tab.addEventListener("click", () => store.setInputMode(tab.dataset.mode as InputMode));
    });
    root.querySelectorAll<HTMLElement>(".history-entry").forEach((entry) => {
      entry.addEventListener("click", () => {
        const id = entry.dataset.sessionId;
        if (id) void store.openSession(id);
      });
    });
  });

  draft.addEventListener("input", () => store.setDraft(draft.value));
  newButton.addEventListener("click", () => void store.newSession());
  sendButton.addEventListener("click", () => void store.submitTypewriting());
  queryButton.addEventListener("click", () => void store.submitDirectQuery());
  filePicker.addEventListener("change", () => {
    const file = filePicker.files?.[0];
    if (file) void store.submitUpload(file, file.name);
    filePicker.value = "";
  });
  recordButton.addEventListener("click", () => {
    if (recorder.recording) {
      void recorder.stop().then(({ audioRef }) => {
        if (audioRef) void store.submitSpeaking(audioRef);
        recordButton.textContent = "Start recording";
      });
    } else {
      void recorder.start().then(() => {
        recordButton.textContent = "Stop recording";
      });
    }
  });

  void store.refreshSessions();
}

document.addEventListener("DOMContentLoaded", bootstrap);
