/** Network display: an egocentric star whose nodes encode pickup
 * probability (size, hue, and a text label above the node) and whose
 * edges encode flow (width). Animated payloads loop through their
 * frames at the payload's own interval on a frozen layout.
 */

import { computeStarLayout, type StarLayout } from "./layout.js";
import type { DisplayPayloadDoc, OutcomeFrameDoc } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface FrameView {
  flows: number[];
  probabilities: number[];
}

export function nodeRadius(probability: number): number {
  return 12 + 26 * probability;
}

export function nodeColor(probability: number): string {
  const lightness = 88 - 48 * probability;
  return `hsl(210, 72%, ${lightness.toFixed(1)}%)`;
}

export function edgeWidth(flow: number, totalFlow: number): number {
  if (totalFlow <= 0) return 1;
  return 1.5 + 16 * (flow / totalFlow);
}

export function formatProbability(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export class NetworkView {
  readonly svg: SVGSVGElement;
  private layout: StarLayout;
  private edges: SVGLineElement[] = [];
  private circles: SVGCircleElement[] = [];
  private probLabels: SVGTextElement[] = [];
  private flowLabels: SVGTextElement[] = [];

  constructor(
    private labels: string[],
    width = 420,
    height = 360,
    private showProbabilities = true,
  ) {
    this.svg = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    this.svg.setAttribute("width", String(width));
    this.svg.setAttribute("height", String(height));
    this.svg.setAttribute("class", "network-view");
    this.layout = computeStarLayout(labels.length, width, height);

    for (let i = 0; i < labels.length; i++) {
      const edge = document.createElementNS(SVG_NS, "line") as SVGLineElement;
      edge.setAttribute("x1", String(this.layout.ego.x));
      edge.setAttribute("y1", String(this.layout.ego.y));
      edge.setAttribute("x2", String(this.layout.nodes[i].x));
      edge.setAttribute("y2", String(this.layout.nodes[i].y));
      edge.setAttribute("stroke", "#9aa7b1");
      edge.setAttribute("data-role", "flow-edge");
      this.svg.appendChild(edge);
      this.edges.push(edge);
    }
    const ego = document.createElementNS(SVG_NS, "circle");
    ego.setAttribute("cx", String(this.layout.ego.x));
    ego.setAttribute("cy", String(this.layout.ego.y));
    ego.setAttribute("r", "10");
    ego.setAttribute("fill", "#2b2b2b");
    this.svg.appendChild(ego);
    const egoLabel = document.createElementNS(SVG_NS, "text") as SVGTextElement;
    egoLabel.setAttribute("x", String(this.layout.ego.x));
    egoLabel.setAttribute("y", String(this.layout.ego.y + 24));
    egoLabel.setAttribute("text-anchor", "middle");
    egoLabel.textContent = "You";
    this.svg.appendChild(egoLabel);

    for (let i = 0; i < labels.length; i++) {
      const { x, y } = this.layout.nodes[i];
      const circle = document.createElementNS(SVG_NS, "circle") as SVGCircleElement;
      circle.setAttribute("cx", String(x));
      circle.setAttribute("cy", String(y));
      circle.setAttribute("data-role", "district-node");
      circle.setAttribute("data-district", labels[i]);
      this.svg.appendChild(circle);
      this.circles.push(circle);

      if (this.showProbabilities) {
        const prob = document.createElementNS(SVG_NS, "text") as SVGTextElement;
        prob.setAttribute("x", String(x));
        prob.setAttribute("y", String(y - 44));
        prob.setAttribute("text-anchor", "middle");
        prob.setAttribute("data-role", "probability-label");
        prob.setAttribute("data-district", labels[i]);
        this.svg.appendChild(prob);
        this.probLabels.push(prob);
      }

      const name = document.createElementNS(SVG_NS, "text") as SVGTextElement;
      name.setAttribute("x", String(x));
      name.setAttribute("y", String(y + 52));
      name.setAttribute("text-anchor", "middle");
      name.setAttribute("data-role", "flow-label");
      name.setAttribute("data-district", labels[i]);
      this.svg.appendChild(name);
      this.flowLabels.push(name);
    }
  }

  render(frame: FrameView): void {
    const total = frame.flows.reduce((a, b) => a + b, 0);
    for (let i = 0; i < this.labels.length; i++) {
      const p = frame.probabilities[i];
      this.circles[i].setAttribute("r", nodeRadius(p).toFixed(2));
      this.circles[i].setAttribute("fill", nodeColor(p));
      if (this.showProbabilities) {
        this.probLabels[i].textContent = formatProbability(p);
      }
      this.flowLabels[i].textContent = `${this.labels[i]}: ${Math.round(
        frame.flows[i],
      )}`;
      this.edges[i].setAttribute(
        "stroke-width",
        edgeWidth(frame.flows[i], total).toFixed(2),
      );
    }
  }
}

/** Loops over frames in payload order; pausing keeps the current index
 * so no frame is ever skipped. */
export class AnimationController {
  private index = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private frames: OutcomeFrameDoc[],
    private intervalSeconds: number,
    private onFrame: (frame: OutcomeFrameDoc, index: number) => void,
  ) {
    if (frames.length === 0) {
      throw new Error("animation needs at least one frame");
    }
  }

  get currentIndex(): number {
    return this.index;
  }

  get playing(): boolean {
    return this.timer !== null;
  }

  start(): void {
    if (this.timer !== null) return;
    this.onFrame(this.frames[this.index], this.index);
    this.timer = setInterval(() => {
      this.index = (this.index + 1) % this.frames.length;
      this.onFrame(this.frames[this.index], this.index);
    }, this.intervalSeconds * 1000);
  }

  pause(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

export interface DisplayHandle {
  element: HTMLElement;
  view: NetworkView;
  animation: AnimationController | null;
}

/** Render a display payload: static payloads show the point estimate and
 * start no timers; animated payloads loop at the payload's interval. */
export function renderDisplay(
  payload: DisplayPayloadDoc,
  labels: string[],
): DisplayHandle {
  const container = document.createElement("div");
  container.setAttribute("data-role", "display");
  const view = new NetworkView(labels);
  container.appendChild(view.svg as unknown as Node);

  if (payload.kind === "static") {
    view.render({
      flows: payload.static.flows,
      probabilities: payload.static.probabilities,
    });
    return { element: container, view, animation: null };
  }

  const frames = payload.frames ?? [];
  const animation = new AnimationController(
    frames,
    payload.frame_interval,
    (frame) =>
      view.render({ flows: frame.flow, probabilities: frame.probabilities }),
  );
  const controls = document.createElement("div");
  const toggle = document.createElement("button");
  toggle.textContent = "Pause";
  toggle.setAttribute("data-role", "animation-toggle");
  toggle.addEventListener("click", () => {
    if (animation.playing) {
      animation.pause();
      toggle.textContent = "Play";
    } else {
      animation.start();
      toggle.textContent = "Pause";
    }
  });
  controls.appendChild(toggle);
  container.appendChild(controls);
  animation.start();
  return { element: container, view, animation };
}
