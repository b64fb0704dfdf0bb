/**
 * Typed client for the tilesearch service. Every network interaction in the
 * UI goes through the documented /v1 endpoints here, nowhere else.
 */

export type SearchMethod = "exact" | "lsh";

export interface SearchHit {
  rank: number;
  tile_id: string;
  distance: number;
  lon: number | null;
  lat: number | null;
}

export interface TileCenter {
  tile_id: string;
  lon: number;
  lat: number;
}

export interface Health {
  status: string;
  corpus_size: number;
  index_loaded: boolean;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status?: number,
    readonly code?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  async health(signal?: AbortSignal): Promise<Health> {
    return this.getJson("/v1/health", signal);
  }

  async search(
    tile: string,
    k: number,
    method: SearchMethod,
    includeSelf: boolean,
    signal?: AbortSignal,
  ): Promise<SearchHit[]> {
    const params = new URLSearchParams({
      tile,
      k: String(k),
      method,
      include_self: String(includeSelf),
    });
    return this.getJson(`/v1/search?${params}`, signal);
  }

  async tilesInBbox(
    bbox: readonly [number, number, number, number],
    signal?: AbortSignal,
  ): Promise<TileCenter[]> {
    const params = new URLSearchParams({ bbox: bbox.join(",") });
    return this.getJson(`/v1/tiles?${params}`, signal);
  }

  thumbnailUrl(tileId: string): string {
    return `${this.base}/v1/thumbnail/${encodeURIComponent(tileId)}.png`;
  }

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, { signal });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let code: string | undefined;
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as {
          error?: { code?: string; message?: string };
        };
        code = body.error?.code;
        message = body.error?.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(message, response.status, code);
    }
    return (await response.json()) as T;
  }
}
