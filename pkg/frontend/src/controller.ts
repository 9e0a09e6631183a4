/**
 * Participant-session driver.  The DOM layer binds response buttons to
 * `press()`; everything below that call is identical whether the press came
 * from a real click, a hotkey, or a scripted test.
 */

import {
  ApiError,
  type CreateSessionParams,
  type LiveDoc,
  type ResponseResult,
  ServiceClient,
} from "./api.js";
import { type ButtonLayout, buttonLayout, isFinished } from "./viewmodel.js";

export class ParticipantController {
  private liveDoc: LiveDoc | null = null;

  constructor(
    readonly client: ServiceClient,
    readonly sessionId: string,
  ) {}

  static async create(
    client: ServiceClient,
    params: CreateSessionParams,
  ): Promise<ParticipantController> {
    const handle = await client.createSession(params);
    const controller = new ParticipantController(client, handle.session_id);
    await controller.refresh();
    return controller;
  }

  get live(): LiveDoc {
    if (this.liveDoc === null) {
      throw new Error("controller not refreshed yet");
    }
    return this.liveDoc;
  }

  async refresh(): Promise<LiveDoc> {
    this.liveDoc = await this.client.getLive(this.sessionId);
    return this.liveDoc;
  }

  get finished(): boolean {
    return isFinished(this.live.phase);
  }

  get awaitingResponse(): boolean {
    return this.live.phase === "AWAITING_RESPONSE";
  }

  /** Button arrangement for the current trial (orientation-aware). */
  layout(): ButtonLayout {
    return buttonLayout(this.live.task, this.live.orientation, this.live.options);
  }

  /**
   * Handle one response press.  Returns the service's acknowledgement and
   * refreshes the live document so the next render sees the new trial.
   */
  async press(option: string): Promise<ResponseResult> {
    if (!this.live.options.includes(option)) {
      throw new Error(`option ${option} not offered this trial`);
    }
    const result = await this.client.submitResponse(this.sessionId, option);
    await this.refresh();
    return result;
  }

  async abort(): Promise<void> {
    try {
      await this.client.abort(this.sessionId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        throw err; // already finished is fine; anything else is not
      }
    }
    await this.refresh();
  }
}
