/** Monotonic ticket counter so only the newest in-flight response renders. */

export class LatestWins {
  private counter = 0;

  /** Claim a ticket for a request about to be sent. */
  next(): number {
    this.counter += 1;
    return this.counter;
  }

  /** True when the ticket still belongs to the newest request. */
  isCurrent(ticket: number): boolean {
    return ticket === this.counter;
  }
}
