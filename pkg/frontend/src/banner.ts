/** The status/error banner above the map. */

import type { UiState } from "./state.js";

export function renderBanner(el: HTMLElement, state: UiState): void {
  el.classList.remove("error", "info", "hidden");
  switch (state.status) {
    case "error":
      el.classList.add("error");
      el.textContent = `search failed: ${state.error ?? "unknown error"}`;
      break;
    case "no-tile":
      el.classList.add("info");
      el.textContent = "no tile here - click closer to the imagery";
      break;
    case "loading":
      el.classList.add("info");
      el.textContent = "searching...";
      break;
    default:
      el.classList.add("hidden");
      el.textContent = "";
  }
}
