/**
 * Click-to-query orchestration.
 *
 * A map click resolves to the nearest tile center with a single small bbox
 * probe, then issues one search. Only one search is in flight at a time:
 * a new click aborts and supersedes the pending one (latest click wins),
 * enforced both by AbortController and a monotonically increasing token.
 */

import type { ApiClient, TileCenter } from "./api.js";
import {
  applyFailure,
  applyNoTile,
  applyResults,
  beginQuery,
  type Store,
  type Viewport,
} from "./state.js";

export class SearchController {
  private seq = 0;
  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly store: Store,
    private readonly radiusFraction: number,
  ) {}

  /** Resolve a map click to a tile and query it; one bbox probe per click. */
  async clickToQuery(lon: number, lat: number): Promise<void> {
    const token = this.nextToken();
    const radius = this.clickRadius();
    this.store.update(beginQuery);
    let centers: TileCenter[];
    try {
      centers = await this.api.tilesInBbox(
        [lon - radius, lat - radius, lon + radius, lat + radius],
        this.inflight?.signal,
      );
    } catch (err) {
      this.failUnlessStale(token, err);
      return;
    }
    if (this.isStale(token)) return;
    const nearest = nearestCenter(centers, lon, lat);
    if (nearest === null) {
      this.store.update(applyNoTile);
      return;
    }
    await this.runSearch(nearest.tile_id, token);
  }

  /** Query a known tile directly (thumbnail clicks re-enter here). */
  async queryTile(tile: string): Promise<void> {
    const token = this.nextToken();
    this.store.update(beginQuery);
    await this.runSearch(tile, token);
  }

  private async runSearch(tile: string, token: number): Promise<void> {
    const { k, method, includeSelf } = this.store.get();
    try {
      const results = await this.api.search(
        tile,
        k,
        method,
        includeSelf,
        this.inflight?.signal,
      );
      if (this.isStale(token)) return;
      this.store.update((s) => applyResults(s, tile, results));
    } catch (err) {
      this.failUnlessStale(token, err);
    }
  }

  private nextToken(): number {
    this.inflight?.abort();
    this.inflight = typeof AbortController !== "undefined" ? new AbortController() : null;
    return ++this.seq;
  }

  private isStale(token: number): boolean {
    return token !== this.seq;
  }

  private failUnlessStale(token: number, err: unknown): void {
    if (this.isStale(token)) return;
    if (err instanceof DOMException && err.name === "AbortError") return;
    const message = err instanceof Error ? err.message : String(err);
    this.store.update((s) => applyFailure(s, message));
  }

  private clickRadius(): number {
    const vp = this.store.get().viewport;
    if (vp === null) return 1.0;
    const diag = Math.hypot(vp.maxLon - vp.minLon, vp.maxLat - vp.minLat);
    return Math.max(diag * this.radiusFraction, 1e-9);
  }
}

export function nearestCenter(
  centers: TileCenter[],
  lon: number,
  lat: number,
): TileCenter | null {
  let best: TileCenter | null = null;
  let bestDist = Infinity;
  for (const c of centers) {
    const d = Math.hypot(c.lon - lon, c.lat - lat);
    if (d < bestDist) {
      best = c;
      bestDist = d;
    }
  }
  return best;
}

export function viewportFromCenters(centers: TileCenter[]): Viewport | null {
  if (centers.length === 0) return null;
  const lons = centers.map((c) => c.lon);
  const lats = centers.map((c) => c.lat);
  return {
    minLon: Math.min(...lons),
    minLat: Math.min(...lats),
    maxLon: Math.max(...lons),
    maxLat: Math.max(...lats),
  };
}
