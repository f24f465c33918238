// Canvas renderer for the live yard: map polygons plus one marker per agent,
// colored by status and oriented by heading.

import type { DashboardState } from "./state.js";
import { boundsOf, expand, fitToBounds, worldToScreen, type Transform } from "./transform.js";

export const STATUS_COLORS: Record<string, string> = {
  free: "#4caf50",
  ready: "#ff9800",
  busy: "#e53935",
};

const TYPE_FILLS: Record<string, string> = {
  obstacle: "#455a64",
  gate: "#1e88e5",
  parking_slot: "#8e24aa",
};

export class YardView {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement, private state: DashboardState) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  private transform(): Transform {
    const points: { x: number; y: number }[] = [];
    for (const obj of this.state.mapObjects.values()) {
      points.push(...obj.geometry);
    }
    for (const agent of this.state.agents.values()) {
      if (agent.pose) {
        points.push(agent.pose);
      }
    }
    const bounds = expand(boundsOf(points) ?? { minX: -10, minY: -10, maxX: 10, maxY: 10 }, 5);
    return fitToBounds(bounds, this.canvas.width, this.canvas.height);
  }

  render(): void {
    const { ctx, canvas } = this;
    const t = this.transform();
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#fafafa";
    ctx.fillRect(0, 0, canvas.width, canvas.height);

    for (const obj of this.state.mapObjects.values()) {
      if (obj.geometry.length < 3) {
        continue;
      }
      ctx.beginPath();
      obj.geometry.forEach((p, i) => {
        const s = worldToScreen(t, p.x, p.y);
        i === 0 ? ctx.moveTo(s.x, s.y) : ctx.lineTo(s.x, s.y);
      });
      ctx.closePath();
      ctx.fillStyle = TYPE_FILLS[obj.object_type] ?? "#90a4ae";
      ctx.globalAlpha = obj.object_type === "obstacle" ? 0.9 : 0.45;
      ctx.fill();
      ctx.globalAlpha = 1.0;
      const first = worldToScreen(t, obj.geometry[0].x, obj.geometry[0].y);
      ctx.fillStyle = "#37474f";
      ctx.font = "11px sans-serif";
      ctx.fillText(obj.object_id, first.x + 3, first.y - 3);
    }

    for (const agent of this.state.agents.values()) {
      if (!agent.pose) {
        continue;
      }
      const s = worldToScreen(t, agent.pose.x, agent.pose.y);
      const r = 7;
      ctx.beginPath();
      ctx.arc(s.x, s.y, r, 0, 2 * Math.PI);
      ctx.fillStyle = STATUS_COLORS[agent.status] ?? "#9e9e9e";
      ctx.globalAlpha = agent.connection === "online" ? 1.0 : 0.35;
      ctx.fill();
      ctx.globalAlpha = 1.0;
      // heading tick (canvas y is flipped)
      ctx.beginPath();
      ctx.moveTo(s.x, s.y);
      ctx.lineTo(
        s.x + Math.cos(agent.pose.heading) * r * 1.8,
        s.y - Math.sin(agent.pose.heading) * r * 1.8,
      );
      ctx.strokeStyle = "#212121";
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.fillStyle = "#212121";
      ctx.font = "12px sans-serif";
      ctx.fillText(agent.name || agent.agent_uuid, s.x + r + 2, s.y + 4);
    }

    ctx.fillStyle = "#616161";
    ctx.font = "11px sans-serif";
    ctx.fillText(`map revision ${this.state.revision}`, 8, canvas.height - 8);
  }
}
