/** Runtime configuration for the UI bundle. */

export interface AppConfig {
  /** Base URL of the tilesearch HTTP service, no trailing slash. */
  apiBase: string;
  /**
   * Click resolution radius as a fraction of the corpus extent diagonal:
   * the bbox probed around a map click when resolving the nearest tile.
   */
  clickRadiusFraction: number;
}

declare global {
  interface Window {
    TILESEARCH_API?: string;
  }
}

export const DEFAULT_API_BASE = "http://localhost:8768";

export function loadConfig(): AppConfig {
  const fromWindow =
    typeof window !== "undefined" ? window.TILESEARCH_API : undefined;
  return {
    apiBase: (fromWindow ?? DEFAULT_API_BASE).replace(/\/+$/, ""),
    clickRadiusFraction: 1 / 12,
  };
}
