//! Host-to-device command framing, servo PWM mapping and a loopback link.

mod frame;
mod loopback;
mod pwm;

pub use frame::{
    annotate_dump, checksum, cmm_to_mm, decode_all, decode_frame, encode_frame, mm_to_cmm,
    CommandFrame, DecodeError, Decoder, DeviceId, Payload, ProtocolError, QUAD_LIMIT_CMM, SYNC,
};
pub use loopback::{
    loopback_session, Endpoint, LinkError, LinkEvent, LinkStats, LinkTrace, QuadEndpoint,
    SqueezerEndpoint, Transport, READ_CHUNK,
};
pub use pwm::{
    angle_to_pwm, angle_to_pwm_with, counteracting_angles, frame_to_pwm, pwm_to_signal,
    quantization_bound, signal_to_servo_angle, PwmSetting, ServoConfig, MAX_SERVO_ANGLE,
    PWM_RESOLUTION,
};
