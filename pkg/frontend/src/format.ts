// Display formatting: all monetary values render with two decimals.

export function money(value: number): string {
    return value.toFixed(2);
}

export function fraction(value: number): string {
    return value.toFixed(2);
}

export function countdown(seconds: number | null): string {
    if (seconds === null) return "";
    return `${Math.max(0, Math.ceil(seconds))}s`;
}
