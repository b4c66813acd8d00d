/** Browser microphone capture for speaking mode.
 *
 * Audio never streams to the diagnostic service itself — transcription is
 * an external concern. In demo deployments the recorder resolves to a
 * configured `fixture:<name>` audio reference that the backend's stub
 * transcriber understands; a production deployment would upload the blob to
 * its own speech-to-text provider and post the resulting text instead.
 */

export interface RecorderOptions {
  /** Demo-mode audio reference posted after a capture completes. */
  demoAudioRef?: string;
  mimeType?: string;
}

export class MicRecorder {
  private recorder: MediaRecorder | null = null;
  private chunks: Blob[] = [];

  constructor(private options: RecorderOptions = {}) {}

  get recording(): boolean {
    return this.recorder !== null && this.recorder.state === "recording";
  }

  async start(): Promise<void> {
    if (this.recording) return;
    const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.chunks = [];
    this.recorder = new MediaRecorder(stream, this.options.mimeType ? { mimeType: this.options.mimeType } : undefined);
    this.recorder.ondataavailable = (event: BlobEvent) => {
      if (event.data.size > 0) this.chunks.push(event.data);
    };
    this.recorder.start(250);
  }

  /** Stop capturing; resolve with the captured audio and the demo ref. */
  stop(): Promise<{ audio: Blob; audioRef: string | null }> {
    return new Promise((resolve, reject) => {
      const recorder = this.recorder;
      if (!recorder) {
        reject(new Error("not recording"));
        return;
      }
      recorder.onstop = () => {
        recorder.stream.getTracks().forEach((track) => track.stop());
        this.recorder = null;
        resolve({
          audio: new Blob(this.chunks, { type: recorder.mimeType }),
          audioRef: this.options.demoAudioRef ?? null,
        });
      };
      recorder.stop();
    });
  }
}
