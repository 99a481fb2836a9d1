// 2D top-down scene plot (x right, y up, robot-centric desk scale). Enough to
// decide where to steer a task; deliberately not a 3D view.

import type { ObservationDoc } from './types.js';

const SCALE = 170; // px per meter
const RANGE = 1.2; // meters shown from the origin in every direction

function toCanvas(x: number, y: number, w: number, h: number): [number, number] {
  return [w / 2 + x * SCALE, h / 2 - y * SCALE];
}

export function drawScene(canvas: HTMLCanvasElement, observation: ObservationDoc | null): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = '#0b1220';
  ctx.fillRect(0, 0, w, h);

  // grid every 0.25 m
  ctx.strokeStyle = '#1c2a42';
  ctx.lineWidth = 1;
  for (let m = -RANGE; m <= RANGE; m += 0.25) {
    const [gx] = toCanvas(m, 0, w, h);
    const [, gy] = toCanvas(0, m, w, h);
    ctx.beginPath();
    ctx.moveTo(gx, 0);
    ctx.lineTo(gx, h);
    ctx.moveTo(0, gy);
    ctx.lineTo(w, gy);
    ctx.stroke();
  }
  if (!observation) {
    ctx.fillStyle = '#4c5e7d';
    ctx.font = '13px sans-serif';
    ctx.fillText('no observation yet', 16, 24);
    return;
  }

  // robot base (triangle pointing along yaw) and end effector
  const base = observation.robot.base_pose;
  const [bx, by] = toCanvas(base[0], base[1], w, h);
  const yaw = base[5];
  ctx.fillStyle = '#38bdf8';
  ctx.beginPath();
  ctx.moveTo(bx + 12 * Math.cos(-yaw), by + 12 * Math.sin(-yaw));
  ctx.lineTo(bx + 9 * Math.cos(-yaw + 2.5), by + 9 * Math.sin(-yaw + 2.5));
  ctx.lineTo(bx + 9 * Math.cos(-yaw - 2.5), by + 9 * Math.sin(-yaw - 2.5));
  ctx.closePath();
  ctx.fill();
  const ee = observation.robot.ee_pose;
  const [ex, ey] = toCanvas(ee[0], ee[1], w, h);
  ctx.strokeStyle = '#38bdf8';
  ctx.beginPath();
  ctx.moveTo(bx, by);
  ctx.lineTo(ex, ey);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(ex, ey, 4, 0, Math.PI * 2);
  ctx.stroke();

  ctx.font = '11px sans-serif';
  for (const [label, record] of Object.entries(observation.objects)) {
    const [ox, oy] = toCanvas(record.pose[0], record.pose[1], w, h);
    const held = observation.robot.holding === label;
    ctx.fillStyle = held ? '#f59e0b' : record.graspable ? '#4ade80' : '#94a3b8';
    ctx.beginPath();
    ctx.arc(ox, oy, record.graspable ? 6 : 8, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = '#cbd5e1';
    ctx.fillText(label, ox + 9, oy + 4);
  }

  if (observation.delivered.length > 0) {
    ctx.fillStyle = '#a78bfa';
    ctx.fillText(`handed over: ${observation.delivered.join(', ')}`, 12, h - 12);
  }
}
