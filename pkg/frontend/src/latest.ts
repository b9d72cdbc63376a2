/** Latest-wins request guard: an in-flight query and the metrics poll run
 * concurrently, and a slow response must never overwrite a newer one. */
export class Latest {
  private token = 0;

  /** Claim a new token, invalidating all previously issued ones. */
  next(): number {
    return ++this.token;
  }

  /** True while the given token is still the most recent. */
  isCurrent(token: number): boolean {
    return token === this.token;
  }
}
