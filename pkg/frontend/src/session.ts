const STORAGE_KEY = "realabel-rater-id";

/** Stable per-browser rater id; no login, stored client-side. */
export function getRaterId(storage: Storage): string {
  const existing = storage.getItem(STORAGE_KEY);
  if (existing) return existing;
  const fresh = `rater-${Date.now().toString(36)}-${Math.random()
    .toString(36)
    .slice(2, 8)}`;
  storage.setItem(STORAGE_KEY, fresh);
  return fresh;
}
