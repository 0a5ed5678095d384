/** Task image with a retry affordance on load failure: the rater must
 * never be pushed toward submitting against a broken image. */
export function taskImage(doc: Document, src: string): HTMLElement {
  const wrap = doc.createElement("div");
  wrap.className = "task-image";
  const img = doc.createElement("img");
  img.src = src;
  img.alt = "task image";
  const retry = doc.createElement("button");
  retry.type = "button";
  retry.className = "image-retry";
  retry.textContent = "Image failed to load - retry";
  retry.hidden = true;
  img.addEventListener("error", () => {
    retry.hidden = false;
  });
  retry.addEventListener("click", () => {
    retry.hidden = true;
    const url = new URL(src, "http://placeholder.invalid/");
    url.searchParams.set("retry", Date.now().toString());
    // Keep relative sources relative; only bust the cache.
    img.src = src.includes("://") ? url.toString() : `${src}?retry=${Date.now()}`;
  });
  wrap.append(img, retry);
  return wrap;
}

export function imageUrl(baseUrl: string, imageId: string): string {
  return `${baseUrl.replace(/\/$/, "")}/${encodeURIComponent(imageId)}`;
}
