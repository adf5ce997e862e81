import { describe, expect, it } from "vitest";

import { OVER_COLOR, UNDER_COLOR, renderFeedback } from "../src/feedback";
import type { FeedbackDoc } from "../src/types";

const LABELS = ["west", "north", "east"];

function banditFeedback(): FeedbackDoc {
  return {
    schema: "feedback/1",
    trial: 3,
    structure: "bandit",
    got_pickup: true,
    reward_delta: 0.2,
    running_reward: 2.6,
    done: false,
  };
}

function fullFeedback(): FeedbackDoc {
  return {
    schema: "feedback/1",
    trial: 3,
    structure: "full",
    got_pickup: false,
    reward_delta: 0,
    running_reward: 2.4,
    done: false,
    displayed_flows: [300, 150, 148],
    displayed_probabilities: [0.45, 0.32, 0.41],
    realized_flows: [280, 170, 148],
    realized_probabilities: [0.47, 0.3, 0.41],
    anticipated_flows: [310, 140, 148],
    prediction_error: [-20, 20, 0],
    anticipation_gap: [-30, 30, 0],
  };
}

describe("renderFeedback", () => {
  it("bandit pages show exactly one result panel and nothing else", () => {
    const page = renderFeedback(banditFeedback(), LABELS);
    expect(page.querySelectorAll('[data-role="result-panel"]').length).toBe(1);
    expect(page.querySelectorAll('[data-role="network-panel"]').length).toBe(0);
  });

  it("bandit pages carry no flow data in the rendered output", () => {
    const page = renderFeedback(banditFeedback(), LABELS);
    expect(page.querySelectorAll("svg").length).toBe(0);
    expect(page.querySelectorAll('[data-role="flow-edge"]').length).toBe(0);
    expect(page.querySelectorAll('[data-role="flow-label"]').length).toBe(0);
    expect(page.querySelectorAll("[data-direction]").length).toBe(0);
    const text = page.textContent ?? "";
    for (const flowNumber of ["300", "150", "148", "280", "170"]) {
      expect(text).not.toContain(flowNumber);
    }
  });

  it("bandit result shows the compensation verbatim", () => {
    const page = renderFeedback(banditFeedback(), LABELS);
    const comp = page.querySelector('[data-role="compensation"]');
    expect(comp?.textContent).toContain("$0.20");
    expect(comp?.textContent).toContain("$2.60");
  });

  it("full pages show three side-by-side network views", () => {
    const page = renderFeedback(fullFeedback(), LABELS);
    expect(page.querySelectorAll('[data-role="network-panel"]').length).toBe(3);
    expect(page.querySelectorAll("svg").length).toBe(3);
  });

  it("over-estimation is blue and under-estimation is red", () => {
    const page = renderFeedback(fullFeedback(), LABELS);
    const west = page.querySelector(
      '[data-role="prediction-error"][data-district="west"]',
    ) as HTMLElement;
    // realized 280 < displayed 300: the display over-estimated
    expect(west.getAttribute("data-direction")).toBe("over");
    expect(west.style.color).toBe(OVER_COLOR);
    expect(west.textContent).toContain("over-estimated by 20.0");
    const north = page.querySelector(
      '[data-role="prediction-error"][data-district="north"]',
    ) as HTMLElement;
    expect(north.getAttribute("data-direction")).toBe("under");
    expect(north.style.color).toBe(UNDER_COLOR);
    const east = page.querySelector(
      '[data-role="prediction-error"][data-district="east"]',
    ) as HTMLElement;
    expect(east.getAttribute("data-direction")).toBe("exact");
  });

  it("anticipation errors follow the same convention", () => {
    const page = renderFeedback(fullFeedback(), LABELS);
    const west = page.querySelector(
      '[data-role="anticipation-error"][data-district="west"]',
    ) as HTMLElement;
    expect(west.getAttribute("data-direction")).toBe("over");
    expect(west.textContent).toContain("30.0");
  });

  it("renders the payload's numbers verbatim in the network panels", () => {
    const page = renderFeedback(fullFeedback(), LABELS);
    const panels = page.querySelectorAll('[data-role="network-panel"]');
    const displayedFlows = Array.from(
      panels[0].querySelectorAll('[data-role="flow-label"]'),
    ).map((el) => el.textContent);
    expect(displayedFlows).toEqual(["west: 300", "north: 150", "east: 148"]);
    const realizedFlows = Array.from(
      panels[1].querySelectorAll('[data-role="flow-label"]'),
    ).map((el) => el.textContent);
    expect(realizedFlows).toEqual(["west: 280", "north: 170", "east: 148"]);
    const anticipated = Array.from(
      panels[2].querySelectorAll('[data-role="flow-label"]'),
    ).map((el) => el.textContent);
    expect(anticipated).toEqual(["west: 310", "north: 140", "east: 148"]);
  });
});
