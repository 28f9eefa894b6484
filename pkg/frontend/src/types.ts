// Shared contract with the inference service: 20 attribute sliders, each in
// [0, 1]. Indices 0..2 are head pose, 3..19 the 17 action units.

export const NUM_ATTRIBUTES = 20;

export const ATTRIBUTE_NAMES: readonly string[] = [
  'pitch', 'yaw', 'roll',
  'AU01', 'AU02', 'AU04', 'AU05', 'AU06', 'AU07', 'AU09',
  'AU10', 'AU12', 'AU14', 'AU15', 'AU17', 'AU20', 'AU23',
  'AU25', 'AU26', 'AU45',
];

export const NEUTRAL: readonly number[] = [
  0.5, 0.5, 0.5,
  0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
];

export interface SessionInfo {
  sessionId: string;
  neutralPreview: string; // base64 PNG
}

export interface ReenactResult {
  image: string; // base64 PNG
  clamped: boolean;
}

export interface ModelInfo {
  checkpointHash: string;
  resolution: number;
  preset: string;
  trainedSteps: number;
}

export class ServiceError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}
