/** Egocentric star layout.
 *
 * Positions are relaxed once with a small force simulation (spring to a
 * preferred radius around the ego, mutual repulsion between district
 * nodes) and then frozen, so animation frames only change visual
 * encodings, never geometry.
 */

export interface Point {
  x: number;
  y: number;
}

export interface StarLayout {
  ego: Point;
  nodes: Point[];
}

export function computeStarLayout(
  nDistricts: number,
  width: number,
  height: number,
  radius = 0.33,
): StarLayout {
  const cx = width / 2;
  const cy = height / 2;
  const r = Math.min(width, height) * radius;
  // deterministic seed angles, slightly offset so the star is not axis-aligned
  const nodes: Point[] = [];
  for (let i = 0; i < nDistricts; i++) {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / nDistricts + 0.25;
    nodes.push({ x: cx + r * Math.cos(angle), y: cy + r * Math.sin(angle) });
  }
  for (let step = 0; step < 120; step++) {
    for (let i = 0; i < nodes.length; i++) {
      let fx = 0;
      let fy = 0;
      // spring toward the preferred orbit radius around the ego
      const dx = nodes[i].x - cx;
      const dy = nodes[i].y - cy;
      const dist = Math.hypot(dx, dy) || 1e-9;
      const stretch = dist - r;
      fx -= 0.1 * stretch * (dx / dist);
      fy -= 0.1 * stretch * (dy / dist);
      // repulsion from the other district nodes
      for (let j = 0; j < nodes.length; j++) {
        if (j === i) continue;
        const rx = nodes[i].x - nodes[j].x;
        const ry = nodes[i].y - nodes[j].y;
        const d2 = rx * rx + ry * ry + 1e-6;
        const d = Math.sqrt(d2);
        const push = Math.min((0.5 * r * r) / d2, 5.0);
        fx += push * (rx / d);
        fy += push * (ry / d);
      }
      nodes[i].x += fx;
      nodes[i].y += fy;
    }
  }
  return { ego: { x: cx, y: cy }, nodes };
}
