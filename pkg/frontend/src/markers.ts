/** Result list -> map marker layer data. */

import type { SearchHit } from "./api.js";

export interface Marker {
  tileId: string;
  lon: number;
  lat: number;
  rank: number;
}

/**
 * One marker per result, at exactly the lon/lat the service returned.
 * Results without coordinates (a corpus ingested without geo metadata)
 * cannot be placed and are omitted.
 */
export function markersFromResults(results: SearchHit[]): Marker[] {
  const markers: Marker[] = [];
  for (const hit of results) {
    if (hit.lon === null || hit.lat === null) continue;
    markers.push({ tileId: hit.tile_id, lon: hit.lon, lat: hit.lat, rank: hit.rank });
  }
  return markers;
}
