/**
 * Canvas map: corpus extent, tile centers, and the result marker layer.
 *
 * The corpora are planar (affine pixel->lon/lat transforms), so a simple
 * linear projection with padding is an honest map; no slippy-tile library
 * is needed at desk scale.
 */

import type { TileCenter } from "./api.js";
import type { Marker } from "./markers.js";
import type { Viewport } from "./state.js";

const PAD_FRACTION = 0.08;

export class MapView {
  private centers: TileCenter[] = [];
  private markers: Marker[] = [];
  private selected: string | null = null;
  private viewport: Viewport | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    onClick: (lon: number, lat: number) => void,
  ) {
    canvas.addEventListener("click", (ev) => {
      const rect = canvas.getBoundingClientRect();
      const point = this.screenToLonLat(ev.clientX - rect.left, ev.clientY - rect.top);
      if (point !== null) onClick(point.lon, point.lat);
    });
  }

  setViewport(viewport: Viewport | null): void {
    this.viewport = viewport;
    this.render();
  }

  setCenters(centers: TileCenter[]): void {
    this.centers = centers;
    this.render();
  }

  setMarkers(markers: Marker[], selected: string | null): void {
    this.markers = markers;
    this.selected = selected;
    this.render();
  }

  get markerCount(): number {
    return this.markers.length;
  }

  private padded(): Viewport | null {
    if (this.viewport === null) return null;
    const { minLon, minLat, maxLon, maxLat } = this.viewport;
    const padLon = Math.max((maxLon - minLon) * PAD_FRACTION, 1e-9);
    const padLat = Math.max((maxLat - minLat) * PAD_FRACTION, 1e-9);
    return {
      minLon: minLon - padLon,
      minLat: minLat - padLat,
      maxLon: maxLon + padLon,
      maxLat: maxLat + padLat,
    };
  }

  lonLatToScreen(lon: number, lat: number): { x: number; y: number } | null {
    const vp = this.padded();
    if (vp === null) return null;
    const x = ((lon - vp.minLon) / (vp.maxLon - vp.minLon)) * this.canvas.width;
    // latitude grows upward, canvas y grows downward
    const y =
      (1 - (lat - vp.minLat) / (vp.maxLat - vp.minLat)) * this.canvas.height;
    return { x, y };
  }

  screenToLonLat(x: number, y: number): { lon: number; lat: number } | null {
    const vp = this.padded();
    if (vp === null) return null;
    const lon = vp.minLon + (x / this.canvas.width) * (vp.maxLon - vp.minLon);
    const lat = vp.minLat + (1 - y / this.canvas.height) * (vp.maxLat - vp.minLat);
    return { lon, lat };
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (ctx === null) return;
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.viewport === null) return;

    ctx.fillStyle = "#3a4355";
    for (const c of this.centers) {
      const p = this.lonLatToScreen(c.lon, c.lat);
      if (p === null) continue;
      ctx.beginPath();
      ctx.arc(p.x, p.y, 2.5, 0, Math.PI * 2);
      ctx.fill();
    }

    for (const m of this.markers) {
      const p = this.lonLatToScreen(m.lon, m.lat);
      if (p === null) continue;
      ctx.fillStyle = m.tileId === this.selected ? "#ffd166" : "#4ecdc4";
      ctx.beginPath();
      ctx.arc(p.x, p.y, m.tileId === this.selected ? 6 : 4, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
