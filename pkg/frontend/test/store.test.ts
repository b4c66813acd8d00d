import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/client.js";
import { ConsoleStore } from "../src/store.js";
import { FOLLOW_UP, FixtureBackend, TABLE_QUERY, TABLE_RECOMMENDATION } from "./fixture_backend.js";

function makeStore(backend: FixtureBackend): ConsoleStore {
  return new ConsoleStore(new ApiClient({ baseUrl: "http://fixture" }, backend.fetch));
}

describe("ConsoleStore", () => {
  it("starts in typewriting mode with exactly one mode active", () => {
    const store = makeStore(new FixtureBackend());
    expect(store.state.inputMode).toBe("typewriting");
    store.setInputMode("speaking");
    expect(store.state.inputMode).toBe("speaking");
  });

  it("creates and opens a session", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    expect(store.state.active?.session_id).toBe("session-01");
    expect(store.state.sessions).toHaveLength(1);
  });

  it("clears the draft only after the backend accepts it", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    store.setDraft("patient reports back pain");
    await store.submitTypewriting();
    expect(store.state.draftText).toBe("");
    expect(store.state.active?.pending_question).toBe(FOLLOW_UP);
    expect(store.state.active?.status).toBe("awaiting-answer");
  });

  it("active view always equals the latest GET snapshot", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    store.setDraft("patient reports back pain");
    await store.submitTypewriting();
    const gets = backend.requests.filter(
      (r) => r.method === "GET" && r.path === "/sessions/session-01",
    );
    expect(gets.length).toBeGreaterThan(1); // polled after the mutation
    expect(store.state.active).toEqual(backend.sessions.get("session-01"));
  });

  it("a dead backend preserves the typed draft and raises a banner", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    store.setDraft("half-typed note about the patient");
    backend.down = true;
    await store.submitTypewriting();
    expect(store.state.draftText).toBe("half-typed note about the patient");
    expect(store.state.errorBanner).toContain("backend unreachable");
    expect(store.state.busy).toBe(false);
  });

  it("HTTP errors surface as readable banners and keep the draft", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    store.setDraft(TABLE_QUERY);
    await store.submitTypewriting(); // concludes the session
    store.setDraft("one more thing");
    await store.submitTypewriting(); // 409 concluded
    expect(store.state.errorBanner).toContain("409");
    expect(store.state.errorBanner).toContain("concluded");
    expect(store.state.draftText).toBe("one more thing");
  });

  it("speaking mode posts an audio reference", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    await store.submitSpeaking("fixture:lumbar-01");
    const post = backend.requests.find((r) => r.path === "/sessions/session-01/utterances");
    expect(post?.body).toEqual({ audio_ref: "fixture:lumbar-01" });
    expect(store.state.active?.transcript[0]?.text).toBe("transcript of fixture:lumbar-01");
  });

  it("uploading mode posts the file and refreshes the view", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    const blob = new Blob([JSON.stringify({ id: "u1", manifestation_text: "leg pain" })]);
    await store.submitUpload(blob, "record.json");
    expect(store.state.active?.transcript[0]?.kind).toBe("uploaded-ehr");
  });

  it("direct queries keep the draft on failure", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    store.setDraft(TABLE_QUERY);
    backend.down = true;
    await store.submitDirectQuery();
    expect(store.state.draftText).toBe(TABLE_QUERY);
    backend.down = false;
    await store.submitDirectQuery();
    expect(store.state.queryResult).toEqual(TABLE_RECOMMENDATION);
    expect(store.state.draftText).toBe("");
  });

  it("opening a history entry loads that session's snapshot", async () => {
    const backend = new FixtureBackend();
    const store = makeStore(backend);
    await store.newSession();
    await store.newSession();
    await store.openSession("session-01");
    expect(store.state.active?.session_id).toBe("session-01");
  });
});
