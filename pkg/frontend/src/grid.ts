/**
 * Thumbnail grid of search results, strictly in rank order, plus the query
 * panel with its local 3x3 neighborhood (the context radius is this UI's
 * choice; the size of "local context" is otherwise unspecified).
 */

import type { ApiClient, SearchHit } from "./api.js";

export function renderGrid(
  container: HTMLElement,
  results: SearchHit[],
  api: ApiClient,
  onTileClick: (tileId: string) => void,
): void {
  container.replaceChildren();
  for (const hit of results) {
    const cell = document.createElement("figure");
    cell.className = "thumb";
    cell.dataset.tile = hit.tile_id;
    cell.dataset.rank = String(hit.rank);

    const img = document.createElement("img");
    img.src = api.thumbnailUrl(hit.tile_id);
    img.alt = hit.tile_id;
    img.width = 96;
    img.height = 96;
    img.loading = "lazy";

    const caption = document.createElement("figcaption");
    caption.textContent = `#${hit.rank} d=${hit.distance}`;

    cell.append(img, caption);
    cell.addEventListener("click", () => onTileClick(hit.tile_id));
    container.appendChild(cell);
  }
}

export function renderQueryPanel(
  container: HTMLElement,
  tileId: string | null,
  api: ApiClient,
): void {
  container.replaceChildren();
  if (tileId === null) return;

  const title = document.createElement("div");
  title.className = "query-title";
  title.textContent = tileId;
  container.appendChild(title);

  const context = document.createElement("div");
  context.className = "context-grid";
  const parts = tileId.split(":");
  const scene = parts.slice(0, -2).join(":");
  const gx = Number(parts[parts.length - 2]);
  const gy = Number(parts[parts.length - 1]);
  for (let dy = -1; dy <= 1; dy++) {
    for (let dx = -1; dx <= 1; dx++) {
      const cell = document.createElement("div");
      cell.className = "context-cell";
      const x = gx + dx;
      const y = gy + dy;
      if (x >= 0 && y >= 0) {
        const img = document.createElement("img");
        img.src = api.thumbnailUrl(`${scene}:${x}:${y}`);
        img.alt = "";
        img.width = 64;
        img.height = 64;
        // edge neighbors may not exist; hide the broken-image glyph
        img.addEventListener("error", () => {
          img.style.visibility = "hidden";
        });
        if (dx === 0 && dy === 0) img.classList.add("query-center");
        cell.appendChild(img);
      }
      context.appendChild(cell);
    }
  }
  container.appendChild(context);
}
