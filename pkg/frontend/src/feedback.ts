/** Post-decision feedback pages.
 *
 * Bandit feedback shows only the result and running compensation. Full
 * feedback adds three side-by-side network views (the prediction used,
 * the realized level-specific outcome, and the submitted anticipation)
 * with signed per-district error labels: blue marks over-estimation
 * (realized below the reference), red marks under-estimation.
 */

import { NetworkView } from "./display.js";
import type { FeedbackDoc } from "./types.js";

export const OVER_COLOR = "#1f77b4"; // blue: reference over-estimated
export const UNDER_COLOR = "#d62728"; // red: reference under-estimated

function resultPanel(feedback: FeedbackDoc): HTMLElement {
  const panel = document.createElement("section");
  panel.setAttribute("data-role", "result-panel");
  const headline = document.createElement("h2");
  headline.textContent = feedback.got_pickup
    ? "You got a pickup!"
    : "No pickup this time.";
  panel.appendChild(headline);
  const reward = document.createElement("p");
  reward.setAttribute("data-role", "compensation");
  reward.textContent =
    `Trial bonus: $${feedback.reward_delta.toFixed(2)} - ` +
    `current compensation: $${feedback.running_reward.toFixed(2)}`;
  panel.appendChild(reward);
  return panel;
}

function errorLabel(value: number, district: string, kind: string): HTMLElement {
  const item = document.createElement("li");
  item.setAttribute("data-role", `${kind}-error`);
  item.setAttribute("data-district", district);
  if (value < 0) {
    item.style.color = OVER_COLOR;
    item.setAttribute("data-direction", "over");
    item.textContent = `${district}: over-estimated by ${Math.abs(value).toFixed(1)}`;
  } else if (value > 0) {
    item.style.color = UNDER_COLOR;
    item.setAttribute("data-direction", "under");
    item.textContent = `${district}: under-estimated by ${value.toFixed(1)}`;
  } else {
    item.setAttribute("data-direction", "exact");
    item.textContent = `${district}: exact`;
  }
  return item;
}

function networkPanel(
  title: string,
  labels: string[],
  flows: number[],
  probabilities: number[] | null,
  errors: { values: number[]; kind: string } | null,
): HTMLElement {
  const panel = document.createElement("section");
  panel.setAttribute("data-role", "network-panel");
  const heading = document.createElement("h3");
  heading.textContent = title;
  panel.appendChild(heading);
  const view = new NetworkView(labels, 320, 280, probabilities !== null);
  view.render({
    flows,
    probabilities: probabilities ?? labels.map(() => 0),
  });
  panel.appendChild(view.svg as unknown as Node);
  if (errors) {
    const list = document.createElement("ul");
    errors.values.forEach((value, i) => {
      list.appendChild(errorLabel(value, labels[i], errors.kind));
    });
    panel.appendChild(list);
  }
  return panel;
}

export function renderFeedback(
  feedback: FeedbackDoc,
  labels: string[],
): HTMLElement {
  const root = document.createElement("div");
  root.setAttribute("data-role", "feedback-page");
  root.setAttribute("data-structure", feedback.structure);
  root.appendChild(resultPanel(feedback));
  if (feedback.structure === "bandit") {
    return root;
  }

  const row = document.createElement("div");
  row.setAttribute("data-role", "feedback-networks");
  row.style.display = "flex";
  row.appendChild(
    networkPanel(
      "The prediction you used",
      labels,
      feedback.displayed_flows!,
      feedback.displayed_probabilities!,
      null,
    ),
  );
  row.appendChild(
    networkPanel(
      "What actually happened",
      labels,
      feedback.realized_flows!,
      feedback.realized_probabilities!,
      { values: feedback.prediction_error!, kind: "prediction" },
    ),
  );
  row.appendChild(
    networkPanel(
      "Your anticipation",
      labels,
      feedback.anticipated_flows!,
      null,
      { values: feedback.anticipation_gap!, kind: "anticipation" },
    ),
  );
  root.appendChild(row);
  return root;
}
