/** Page flow: welcome -> instructions -> comprehension -> 15 trials
 * (display + elicitation, then feedback) -> closing summary.
 *
 * The client keeps no game state beyond the session id and the server's
 * cursor; one request is in flight at a time and the server remains the
 * arbiter of ordering and validation.
 */

import { ApiError, SessionApi } from "./api.js";
import { renderDisplay, type DisplayHandle } from "./display.js";
import { renderElicitation } from "./elicitation.js";
import { renderFeedback } from "./feedback.js";
import type { SessionDoc, TrialDoc } from "./types.js";

export class App {
  private api: SessionApi;
  private session: SessionDoc | null = null;
  private busy = false;
  private activeDisplay: DisplayHandle | null = null;

  constructor(
    private root: HTMLElement,
    baseUrl: string = "",
  ) {
    this.api = new SessionApi(baseUrl);
  }

  private swap(...children: HTMLElement[]): void {
    if (this.activeDisplay?.animation) {
      this.activeDisplay.animation.pause();
      this.activeDisplay = null;
    }
    this.root.replaceChildren(...children);
  }

  private note(text: string): HTMLElement {
    const p = document.createElement("p");
    p.setAttribute("data-role", "status");
    p.textContent = text;
    return p;
  }

  async start(): Promise<void> {
    const panel = document.createElement("section");
    const title = document.createElement("h1");
    title.textContent = "Where should I find my next pickup?";
    const blurb = document.createElement("p");
    blurb.textContent =
      "You are a taxi driver choosing where to search for your 9 AM " +
      "pickup. A shared information display summarizes what the other " +
      "drivers are expected to do. Base pay is $2.00 plus $0.20 for " +
      "every trial in which you secure a pickup.";
    const button = document.createElement("button");
    button.textContent = "Join the study";
    button.setAttribute("data-role", "join");
    button.addEventListener("click", () => void this.enroll());
    panel.append(title, blurb, button);
    this.swap(panel);
  }

  private async enroll(): Promise<void> {
    this.session = await this.api.createSession();
    this.showInstructions();
  }

  private showInstructions(): void {
    const session = this.session!;
    const panel = document.createElement("section");
    const heading = document.createElement("h2");
    heading.textContent = "Your situation";
    const text = document.createElement("p");
    text.setAttribute("data-role", "instruction-text");
    text.textContent = session.instruction_text ?? "";
    const next = document.createElement("button");
    next.textContent = "Continue to the comprehension check";
    next.addEventListener("click", () => this.showComprehension());
    panel.append(heading, text, next);
    this.swap(panel);
  }

  private showComprehension(message?: string): void {
    const session = this.session!;
    const spec = session.comprehension;
    const panel = document.createElement("section");
    const prompt = document.createElement("p");
    prompt.textContent = spec.prompt;
    panel.appendChild(prompt);
    if (message) panel.appendChild(this.note(message));

    const form = document.createElement("form");
    let read: () => string | number;
    if (spec.kind === "choice") {
      const select = document.createElement("select");
      for (const option of spec.options ?? []) {
        const el = document.createElement("option");
        el.value = option;
        el.textContent = option;
        select.appendChild(el);
      }
      form.appendChild(select);
      read = () => select.value;
    } else {
      const input = document.createElement("input");
      input.type = "number";
      input.step = "0.01";
      input.min = "0";
      input.max = "1";
      form.appendChild(input);
      read = () => Number(input.value);
    }
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Check my answer";
    form.appendChild(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitComprehension(read());
    });
    panel.appendChild(form);
    this.swap(panel);
  }

  private async submitComprehension(answer: string | number): Promise<void> {
    const result = await this.api.submitComprehension(
      this.session!.session_id,
      answer,
    );
    if (result.unlocked) {
      await this.showTrial(1);
    } else {
      this.showComprehension("Not quite; please try again.");
    }
  }

  private async showTrial(t: number): Promise<void> {
    const session = this.session!;
    const trial = await this.api.getTrial(session.session_id, t);
    const labels = trial.elicitation.districts;
    const panel = document.createElement("section");
    const heading = document.createElement("h2");
    heading.textContent = `Trial ${trial.trial} of ${trial.n_trials}`;
    panel.appendChild(heading);

    const display = renderDisplay(trial.display, labels);
    this.activeDisplay = display;
    panel.appendChild(display.element);

    const form = renderElicitation(labels, trial.elicitation.required_sum);
    form.onSubmit((body) => void this.submitTrial(trial, body));
    panel.appendChild(form.element);
    this.swap(panel);
  }

  private async submitTrial(
    trial: TrialDoc,
    body: { district: string; anticipated: Record<string, number> },
  ): Promise<void> {
    if (this.busy) return; // one in-flight request per session
    this.busy = true;
    try {
      const feedback = await this.api.submitResponse(
        this.session!.session_id,
        trial.trial,
        body,
      );
      const page = renderFeedback(feedback, trial.elicitation.districts);
      const next = document.createElement("button");
      next.setAttribute("data-role", "next-trial");
      if (feedback.done) {
        next.textContent = "Finish";
        next.addEventListener("click", () => void this.showSummary());
      } else {
        next.textContent = "Next trial";
        next.addEventListener("click", () =>
          void this.showTrial(trial.trial + 1),
        );
      }
      page.appendChild(next);
      this.swap(page);
    } catch (error) {
      if (error instanceof ApiError) {
        this.swap(this.note(`${error.message} (${error.code})`));
      } else {
        throw error;
      }
    } finally {
      this.busy = false;
    }
  }

  private async showSummary(): Promise<void> {
    const session = await this.api.getSession(this.session!.session_id);
    const panel = document.createElement("section");
    const heading = document.createElement("h2");
    heading.textContent = "All trials complete";
    const reward = document.createElement("p");
    reward.setAttribute("data-role", "final-compensation");
    reward.textContent = `Final compensation: $${(
      session.running_reward ?? 0
    ).toFixed(2)}`;
    panel.append(heading, reward);
    this.swap(panel);
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, baseUrl);
  void app.start();
  return app;
}
