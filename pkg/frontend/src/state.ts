/**
 * UI state and its pure transitions.
 *
 * Failed or superseded requests never clobber displayed data: the banner
 * reports the problem while the previous selection and results stay up.
 */

import type { SearchHit, SearchMethod } from "./api.js";

export interface Viewport {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

export type UiStatus = "idle" | "loading" | "ready" | "error" | "no-tile";

export interface UiState {
  selectedTile: string | null;
  method: SearchMethod;
  k: number;
  includeSelf: boolean;
  results: SearchHit[];
  viewport: Viewport | null;
  status: UiStatus;
  error: string | null;
}

export const K_CHOICES = [30, 100, 1000] as const;

export const initialState: UiState = {
  selectedTile: null,
  method: "exact",
  k: 1000,
  includeSelf: false,
  results: [],
  viewport: null,
  status: "idle",
  error: null,
};

export function beginQuery(state: UiState): UiState {
  return { ...state, status: "loading", error: null };
}

export function applyResults(
  state: UiState,
  tile: string,
  results: SearchHit[],
): UiState {
  return {
    ...state,
    selectedTile: tile,
    results,
    status: "ready",
    error: null,
  };
}

export function applyFailure(state: UiState, message: string): UiState {
  // previous selection and results are retained deliberately
  return { ...state, status: "error", error: message };
}

export function applyNoTile(state: UiState): UiState {
  return { ...state, status: "no-tile", error: null };
}

export function setViewport(state: UiState, viewport: Viewport): UiState {
  return { ...state, viewport };
}

export function setMethod(state: UiState, method: SearchMethod): UiState {
  return { ...state, method };
}

export function setK(state: UiState, k: number): UiState {
  return { ...state, k };
}

export function setIncludeSelf(state: UiState, includeSelf: boolean): UiState {
  return { ...state, includeSelf };
}

/**
 * The displayed-state invariant: a non-empty result list always belongs to
 * a selected tile whose last completed request succeeded.
 */
export function stateIsConsistent(state: UiState): boolean {
  if (state.results.length === 0) return true;
  return state.selectedTile !== null;
}

export type Listener = (state: UiState) => void;

/** Minimal observable store; one source of truth for the widgets. */
export class Store {
  private state: UiState;
  private listeners: Listener[] = [];

  constructor(start: UiState = initialState) {
    this.state = start;
  }

  get(): UiState {
    return this.state;
  }

  set(next: UiState): void {
    this.state = next;
    for (const fn of this.listeners) fn(next);
  }

  update(fn: (state: UiState) => UiState): void {
    this.set(fn(this.state));
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }
}
